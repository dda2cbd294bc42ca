#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace dyad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct Node;
}

// Dense N-D array of doubles with optional reverse-mode gradient tracking.
// Value-semantic handle onto a shared graph node; data is immutable after
// construction, only grad buffers accumulate.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor uniform(Shape shape, double lo, double hi,
                        std::mt19937_64& rng, bool requires_grad = false);

  bool valid() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  bool requires_grad() const;

  std::span<const double> data() const;
  double item() const;  // scalar tensors only
  double at(const std::vector<std::size_t>& idx) const;

  std::span<const double> grad() const;  // empty until backward touches it
  void zero_grad();

  // Reverse-mode sweep from a scalar tensor; accumulates into grads of
  // every reachable requires_grad node.
  void backward() const;

  // In-place data update for optimizer steps. Only legal on leaf tensors.
  void apply_update(std::span<const double> delta);
  void set_data(std::span<const double> values);

  std::shared_ptr<detail::Node> node() const { return node_; }

  // Internal: wraps an existing graph node. Used by op implementations.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// A named trainable tensor. Frozen parameters keep their gradients but are
// skipped by optimizers.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor tensor, bool frozen = false)
      : name(std::move(name)), tensor(std::move(tensor)), frozen(frozen) {}
  std::string name;
  Tensor tensor;
  bool frozen = false;
};

// --- ops -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise with right-aligned broadcasting (extent 1 or missing leading
// dims stretch).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
Tensor log_op(const Tensor& a);  // requires strictly positive input

Tensor softmax(const Tensor& a, std::size_t axis);

// Concatenate along `axis`; non-axis extents must match after broadcasting
// singleton dimensions.
Tensor concat(const std::vector<Tensor>& tensors, std::size_t axis);

// Max/average pooling; window and stride have one entry per tensor dim,
// floor semantics on the output extents.
Tensor pool_max(const Tensor& a, const std::vector<std::size_t>& window,
                const std::vector<std::size_t>& stride);
Tensor pool_avg(const Tensor& a, const std::vector<std::size_t>& window,
                const std::vector<std::size_t>& stride);

Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start,
             std::size_t len);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Layer normalization over the last axis with learned affine parameters.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng,
               bool training);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

}  // namespace dyad
