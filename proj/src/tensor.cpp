#include "dyad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace dyad {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

using detail::Node;

namespace {

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

void check_finite(const std::vector<double>& data, const char* op) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string("non-finite value produced by ") +
                               op);
    }
  }
}

// Odometer over an output shape that tracks the linear offset into an input
// whose shape broadcasts against it (right-aligned, extent-1 dims stretch).
struct BroadcastIter {
  BroadcastIter(const Shape& out_shape, const Shape& in_shape)
      : out_shape(out_shape), idx(out_shape.size(), 0) {
    auto in_strides = strides_of(in_shape);
    eff.assign(out_shape.size(), 0);
    std::size_t off = out_shape.size() - in_shape.size();
    for (std::size_t d = 0; d < in_shape.size(); ++d) {
      if (in_shape[d] != 1) eff[off + d] = in_strides[d];
    }
  }
  std::size_t offset = 0;
  void next() {
    for (std::size_t d = idx.size(); d-- > 0;) {
      ++idx[d];
      offset += eff[d];
      if (idx[d] < out_shape[d]) return;
      offset -= eff[d] * out_shape[d];
      idx[d] = 0;
    }
  }
  const Shape& out_shape;
  std::vector<std::size_t> idx;
  std::vector<std::size_t> eff;
};

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t d = 0; d < rank; ++d) {
    std::size_t ea = d < rank - a.size() ? 1 : a[d - (rank - a.size())];
    std::size_t eb = d < rank - b.size() ? 1 : b[d - (rank - b.size())];
    if (ea != eb && ea != 1 && eb != 1) {
      throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(a) +
                                  " and " + shape_str(b) +
                                  " are not broadcast-compatible");
    }
    out[d] = std::max(ea, eb);
  }
  return out;
}

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> data,
                                bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return n;
}

}  // namespace

namespace {

// Shared constructor for op results; wires parents and backward closure.
Tensor op_result(const char* op, Shape shape, std::vector<double> data,
                 std::vector<std::shared_ptr<Node>> parents,
                 std::function<void(Node&)> backward_fn) {
  check_finite(data, op);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  auto n = make_node(std::move(shape), std::move(data), rg);
  if (rg) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

}  // namespace

// --- Tensor ------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::size_t n = shape_size(shape);
  return Tensor(
      make_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::size_t n = shape_size(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, value),
                          requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  if (shape_size(shape) != data.size()) {
    throw std::invalid_argument("from_data: shape " + shape_str(shape) +
                                " does not match buffer of " +
                                std::to_string(data.size()) + " elements");
  }
  check_finite(data, "from_data");
  return Tensor(make_node(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, std::mt19937_64& rng,
                       bool requires_grad) {
  std::size_t n = shape_size(shape);
  std::vector<double> data(n);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : data) v = dist(rng);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->data.size(); }
bool Tensor::requires_grad() const { return node_->requires_grad; }

std::span<const double> Tensor::data() const { return node_->data; }

double Tensor::item() const {
  if (node_->data.size() != 1) {
    throw std::invalid_argument("item: tensor has " +
                                std::to_string(node_->data.size()) +
                                " elements, expected 1");
  }
  return node_->data[0];
}

double Tensor::at(const std::vector<std::size_t>& idx) const {
  auto st = strides_of(node_->shape);
  if (idx.size() != st.size()) throw std::invalid_argument("at: rank mismatch");
  std::size_t off = 0;
  for (std::size_t d = 0; d < idx.size(); ++d) off += idx[d] * st[d];
  return node_->data[off];
}

std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() { node_->grad.clear(); }

void Tensor::apply_update(std::span<const double> delta) {
  if (!node_->parents.empty()) {
    throw std::invalid_argument("apply_update: only leaf tensors may mutate");
  }
  if (delta.size() != node_->data.size()) {
    throw std::invalid_argument("apply_update: size mismatch");
  }
  for (std::size_t i = 0; i < delta.size(); ++i) node_->data[i] += delta[i];
  check_finite(node_->data, "apply_update");
}

void Tensor::set_data(std::span<const double> values) {
  if (!node_->parents.empty()) {
    throw std::invalid_argument("set_data: only leaf tensors may mutate");
  }
  if (values.size() != node_->data.size()) {
    throw std::invalid_argument("set_data: size mismatch");
  }
  std::copy(values.begin(), values.end(), node_->data.begin());
  check_finite(node_->data, "set_data");
}

void Tensor::backward() const {
  if (node_->data.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(node_->shape));
  }
  // Post-order DFS for reverse topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  // Interior grads are per-sweep scratch; only leaves accumulate across
  // repeated backward calls.
  for (Node* n : order) {
    if (n->backward_fn) n->grad.assign(n->data.size(), 0.0);
  }
  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

// --- op implementations --------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw std::invalid_argument("matmul: incompatible shapes " +
                                shape_str(sa) + " x " + shape_str(sb));
  }
  std::size_t m = sa[0], k = sa[1], n = sb[1];
  std::vector<double> out(m * n, 0.0);
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double av = da[i * k + p];
      if (av == 0.0) continue;
      const double* brow = db.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  auto na = a.node(), nb = b.node();
  return op_result(
      "matmul", {m, n}, std::move(out), {na, nb},
      [na, nb, m, k, n](Node& self) {
        const auto& g = self.grad;
        if (na->requires_grad) {
          na->ensure_grad();
          // dA = G * B^T
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j)
                acc += g[i * n + j] * nb->data[p * n + j];
              na->grad[i * k + p] += acc;
            }
        }
        if (nb->requires_grad) {
          nb->ensure_grad();
          // dB = A^T * G
          for (std::size_t p = 0; p < k; ++p)
            for (std::size_t i = 0; i < m; ++i) {
              double av = na->data[i * k + p];
              if (av == 0.0) continue;
              for (std::size_t j = 0; j < n; ++j)
                nb->grad[p * n + j] += av * g[i * n + j];
            }
        }
      });
}

namespace {

enum class BinOp { Add, Sub, Mul };

Tensor binary_op(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
  Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
  std::size_t n = shape_size(out_shape);
  std::vector<double> out(n);
  {
    BroadcastIter ia(out_shape, a.shape()), ib(out_shape, b.shape());
    const auto da = a.data(), db = b.data();
    for (std::size_t i = 0; i < n; ++i) {
      double x = da[ia.offset], y = db[ib.offset];
      out[i] = op == BinOp::Add ? x + y : op == BinOp::Sub ? x - y : x * y;
      ia.next();
      ib.next();
    }
  }
  auto na = a.node(), nb = b.node();
  Shape os = out_shape;
  return op_result(
      name, std::move(out_shape), std::move(out), {na, nb},
      [na, nb, op, os](Node& self) {
        std::size_t n = self.data.size();
        if (na->requires_grad) {
          na->ensure_grad();
          BroadcastIter ia(os, na->shape), ib(os, nb->shape);
          for (std::size_t i = 0; i < n; ++i) {
            double g = self.grad[i];
            na->grad[ia.offset] += op == BinOp::Mul ? g * nb->data[ib.offset] : g;
            ia.next();
            ib.next();
          }
        }
        if (nb->requires_grad) {
          nb->ensure_grad();
          BroadcastIter ia(os, na->shape), ib(os, nb->shape);
          for (std::size_t i = 0; i < n; ++i) {
            double g = self.grad[i];
            double gb = op == BinOp::Add  ? g
                        : op == BinOp::Sub ? -g
                                           : g * na->data[ia.offset];
            nb->grad[ib.offset] += gb;
            ia.next();
            ib.next();
          }
        }
      });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Mul, "mul"); }

Tensor scale(const Tensor& a, double factor) {
  std::size_t n = a.size();
  std::vector<double> out(n);
  const auto da = a.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = da[i] * factor;
  auto na = a.node();
  return op_result("scale", a.shape(), std::move(out), {na},
                   [na, factor](Node& self) {
                     na->ensure_grad();
                     for (std::size_t i = 0; i < self.grad.size(); ++i)
                       na->grad[i] += self.grad[i] * factor;
                   });
}

Tensor relu(const Tensor& a) {
  std::size_t n = a.size();
  std::vector<double> out(n);
  const auto da = a.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = da[i] > 0.0 ? da[i] : 0.0;
  auto na = a.node();
  return op_result("relu", a.shape(), std::move(out), {na},
                   [na](Node& self) {
                     na->ensure_grad();
                     for (std::size_t i = 0; i < self.grad.size(); ++i)
                       if (na->data[i] > 0.0) na->grad[i] += self.grad[i];
                   });
}

Tensor log_op(const Tensor& a) {
  std::size_t n = a.size();
  std::vector<double> out(n);
  const auto da = a.data();
  for (std::size_t i = 0; i < n; ++i) {
    if (da[i] <= 0.0) throw std::invalid_argument("log: non-positive input");
    out[i] = std::log(da[i]);
  }
  auto na = a.node();
  return op_result("log", a.shape(), std::move(out), {na},
                   [na](Node& self) {
                     na->ensure_grad();
                     for (std::size_t i = 0; i < self.grad.size(); ++i)
                       na->grad[i] += self.grad[i] / na->data[i];
                   });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const auto& sh = a.shape();
  if (axis >= sh.size()) {
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) +
                                " out of range for shape " + shape_str(sh));
  }
  std::size_t L = sh[axis];
  std::size_t inner = 1, outer = 1;
  for (std::size_t d = axis + 1; d < sh.size(); ++d) inner *= sh[d];
  for (std::size_t d = 0; d < axis; ++d) outer *= sh[d];
  std::vector<double> out(a.size());
  const auto da = a.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) {
      std::size_t base = o * L * inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < L; ++l) mx = std::max(mx, da[base + l * inner]);
      double denom = 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        double e = std::exp(da[base + l * inner] - mx);
        out[base + l * inner] = e;
        denom += e;
      }
      for (std::size_t l = 0; l < L; ++l) out[base + l * inner] /= denom;
    }
  auto na = a.node();
  return op_result(
      "softmax", sh, std::move(out), {na},
      [na, L, inner, outer](Node& self) {
        na->ensure_grad();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < inner; ++i) {
            std::size_t base = o * L * inner + i;
            double dot = 0.0;
            for (std::size_t l = 0; l < L; ++l) {
              std::size_t k = base + l * inner;
              dot += self.grad[k] * self.data[k];
            }
            for (std::size_t l = 0; l < L; ++l) {
              std::size_t k = base + l * inner;
              na->grad[k] += self.data[k] * (self.grad[k] - dot);
            }
          }
      });
}

Tensor concat(const std::vector<Tensor>& tensors, std::size_t axis) {
  if (tensors.empty()) throw std::invalid_argument("concat: empty input list");
  std::size_t rank = 0;
  for (const auto& t : tensors) rank = std::max(rank, t.rank());
  if (axis >= rank) throw std::invalid_argument("concat: axis out of range");
  // Broadcast all non-axis extents; sum the axis extents.
  Shape out_shape(rank, 1);
  std::size_t axis_total = 0;
  std::vector<std::size_t> axis_extents;
  for (const auto& t : tensors) {
    const auto& s = t.shape();
    std::size_t off = rank - s.size();
    std::size_t ax_ext = axis >= off ? s[axis - off] : 1;
    axis_extents.push_back(ax_ext);
    axis_total += ax_ext;
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (off + d == axis) continue;
      if (s[d] == 1) continue;
      if (out_shape[off + d] == 1) {
        out_shape[off + d] = s[d];
      } else if (out_shape[off + d] != s[d]) {
        throw std::invalid_argument(
            "concat: non-axis extent mismatch at dim " +
            std::to_string(off + d) + " (" + shape_str(s) + ")");
      }
    }
  }
  out_shape[axis] = axis_total;
  auto out_strides = strides_of(out_shape);
  std::vector<double> out(shape_size(out_shape));

  // Copy each input into its axis slab, broadcasting singleton dims.
  std::size_t axis_off = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    Shape slab = out_shape;
    slab[axis] = axis_extents[ti];
    BroadcastIter it(slab, tensors[ti].shape());
    const auto d = tensors[ti].data();
    std::size_t slab_n = shape_size(slab);
    for (std::size_t i = 0; i < slab_n; ++i) {
      std::size_t o = axis_off * out_strides[axis];
      for (std::size_t dd = 0; dd < rank; ++dd) o += it.idx[dd] * out_strides[dd];
      out[o] = d[it.offset];
      it.next();
    }
    parents.push_back(tensors[ti].node());
    axis_off += axis_extents[ti];
  }
  Shape os = out_shape;
  auto axis_ext_copy = axis_extents;
  return op_result(
      "concat", std::move(out_shape), std::move(out), parents,
      [parents, os, axis, axis_ext_copy](Node& self) {
        auto out_strides = strides_of(os);
        std::size_t rank = os.size();
        std::size_t axis_off = 0;
        for (std::size_t ti = 0; ti < parents.size(); ++ti) {
          auto& p = parents[ti];
          if (p->requires_grad) {
            p->ensure_grad();
            Shape slab = os;
            slab[axis] = axis_ext_copy[ti];
            BroadcastIter it(slab, p->shape);
            std::size_t slab_n = shape_size(slab);
            for (std::size_t i = 0; i < slab_n; ++i) {
              std::size_t o = axis_off * out_strides[axis];
              for (std::size_t dd = 0; dd < rank; ++dd)
                o += it.idx[dd] * out_strides[dd];
              p->grad[it.offset] += self.grad[o];
              it.next();
            }
          }
          axis_off += axis_ext_copy[ti];
        }
      });
}

namespace {

Tensor pool_impl(const Tensor& a, const std::vector<std::size_t>& window,
                 const std::vector<std::size_t>& stride, bool is_max) {
  const auto& sh = a.shape();
  const char* name = is_max ? "pool_max" : "pool_avg";
  if (window.size() != sh.size() || stride.size() != sh.size()) {
    throw std::invalid_argument(std::string(name) +
                                ": window/stride rank mismatch");
  }
  Shape out_shape(sh.size());
  for (std::size_t d = 0; d < sh.size(); ++d) {
    if (window[d] == 0 || stride[d] == 0)
      throw std::invalid_argument(std::string(name) + ": zero window/stride");
    if (window[d] > sh[d]) {
      throw std::invalid_argument(std::string(name) + ": window exceeds dim " +
                                  std::to_string(d) + " of " + shape_str(sh));
    }
    out_shape[d] = (sh[d] - window[d]) / stride[d] + 1;
  }
  auto in_strides = strides_of(sh);
  std::size_t out_n = shape_size(out_shape);
  std::size_t win_n = shape_size(window);
  std::vector<double> out(out_n);
  std::vector<std::size_t> argmax(is_max ? out_n : 0);
  const auto da = a.data();

  std::vector<std::size_t> oidx(sh.size(), 0), widx(sh.size(), 0);
  for (std::size_t oi = 0; oi < out_n; ++oi) {
    std::size_t base = 0;
    for (std::size_t d = 0; d < sh.size(); ++d)
      base += oidx[d] * stride[d] * in_strides[d];
    double best = -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    std::size_t best_i = base;
    std::fill(widx.begin(), widx.end(), 0);
    std::size_t woff = 0;
    for (std::size_t wi = 0; wi < win_n; ++wi) {
      double v = da[base + woff];
      if (is_max) {
        if (v > best) {
          best = v;
          best_i = base + woff;
        }
      } else {
        acc += v;
      }
      for (std::size_t d = sh.size(); d-- > 0;) {
        ++widx[d];
        woff += in_strides[d];
        if (widx[d] < window[d]) break;
        woff -= in_strides[d] * window[d];
        widx[d] = 0;
      }
    }
    if (is_max) {
      out[oi] = best;
      argmax[oi] = best_i;
    } else {
      out[oi] = acc / static_cast<double>(win_n);
    }
    for (std::size_t d = sh.size(); d-- > 0;) {
      ++oidx[d];
      if (oidx[d] < out_shape[d]) break;
      oidx[d] = 0;
    }
  }
  auto na = a.node();
  if (is_max) {
    return op_result(name, std::move(out_shape), std::move(out), {na},
                     [na, argmax](Node& self) {
                       na->ensure_grad();
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         na->grad[argmax[i]] += self.grad[i];
                     });
  }
  Shape osh = out_shape;
  return op_result(
      name, std::move(out_shape), std::move(out), {na},
      [na, osh, window, stride, win_n](Node& self) {
        na->ensure_grad();
        const auto& sh = na->shape;
        auto in_strides = strides_of(sh);
        std::vector<std::size_t> oidx(sh.size(), 0), widx(sh.size(), 0);
        double inv = 1.0 / static_cast<double>(win_n);
        for (std::size_t oi = 0; oi < self.grad.size(); ++oi) {
          std::size_t base = 0;
          for (std::size_t d = 0; d < sh.size(); ++d)
            base += oidx[d] * stride[d] * in_strides[d];
          double g = self.grad[oi] * inv;
          std::fill(widx.begin(), widx.end(), 0);
          std::size_t woff = 0;
          for (std::size_t wi = 0; wi < win_n; ++wi) {
            na->grad[base + woff] += g;
            for (std::size_t d = sh.size(); d-- > 0;) {
              ++widx[d];
              woff += in_strides[d];
              if (widx[d] < window[d]) break;
              woff -= in_strides[d] * window[d];
              widx[d] = 0;
            }
          }
          for (std::size_t d = sh.size(); d-- > 0;) {
            ++oidx[d];
            if (oidx[d] < osh[d]) break;
            oidx[d] = 0;
          }
        }
      });
}

}  // namespace

Tensor pool_max(const Tensor& a, const std::vector<std::size_t>& window,
                const std::vector<std::size_t>& stride) {
  return pool_impl(a, window, stride, true);
}

Tensor pool_avg(const Tensor& a, const std::vector<std::size_t>& window,
                const std::vector<std::size_t>& stride) {
  return pool_impl(a, window, stride, false);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw std::invalid_argument("reshape: " + shape_str(a.shape()) + " -> " +
                                shape_str(shape) + " changes element count");
  }
  auto na = a.node();
  std::vector<double> out(a.data().begin(), a.data().end());
  return op_result("reshape", std::move(shape), std::move(out), {na},
                   [na](Node& self) {
                     na->ensure_grad();
                     for (std::size_t i = 0; i < self.grad.size(); ++i)
                       na->grad[i] += self.grad[i];
                   });
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes) {
  const auto& sh = a.shape();
  if (axes.size() != sh.size())
    throw std::invalid_argument("permute: rank mismatch");
  Shape out_shape(sh.size());
  for (std::size_t d = 0; d < axes.size(); ++d) out_shape[d] = sh[axes[d]];
  auto in_strides = strides_of(sh);
  std::vector<double> out(a.size());
  const auto da = a.data();
  std::vector<std::size_t> mapping(a.size());
  std::vector<std::size_t> oidx(sh.size(), 0);
  for (std::size_t oi = 0; oi < out.size(); ++oi) {
    std::size_t src = 0;
    for (std::size_t d = 0; d < sh.size(); ++d)
      src += oidx[d] * in_strides[axes[d]];
    out[oi] = da[src];
    mapping[oi] = src;
    for (std::size_t d = sh.size(); d-- > 0;) {
      ++oidx[d];
      if (oidx[d] < out_shape[d]) break;
      oidx[d] = 0;
    }
  }
  auto na = a.node();
  return op_result("permute", std::move(out_shape), std::move(out), {na},
                   [na, mapping](Node& self) {
                     na->ensure_grad();
                     for (std::size_t i = 0; i < self.grad.size(); ++i)
                       na->grad[mapping[i]] += self.grad[i];
                   });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start,
             std::size_t len) {
  const auto& sh = a.shape();
  if (axis >= sh.size() || start + len > sh[axis]) {
    throw std::invalid_argument("slice: range [" + std::to_string(start) +
                                "," + std::to_string(start + len) +
                                ") out of bounds for " + shape_str(sh));
  }
  Shape out_shape = sh;
  out_shape[axis] = len;
  std::size_t inner = 1, outer = 1;
  for (std::size_t d = axis + 1; d < sh.size(); ++d) inner *= sh[d];
  for (std::size_t d = 0; d < axis; ++d) outer *= sh[d];
  std::vector<double> out(shape_size(out_shape));
  const auto da = a.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      std::copy_n(da.data() + (o * sh[axis] + start + l) * inner, inner,
                  out.data() + (o * len + l) * inner);
  auto na = a.node();
  std::size_t ax_ext = sh[axis];
  return op_result("slice", std::move(out_shape), std::move(out), {na},
                   [na, axis, start, len, inner, outer, ax_ext](Node& self) {
                     na->ensure_grad();
                     for (std::size_t o = 0; o < outer; ++o)
                       for (std::size_t l = 0; l < len; ++l) {
                         const double* g = self.grad.data() + (o * len + l) * inner;
                         double* dst =
                             na->grad.data() + (o * ax_ext + start + l) * inner;
                         for (std::size_t i = 0; i < inner; ++i) dst[i] += g[i];
                       }
                   });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  auto na = a.node();
  return op_result("sum", {}, {acc}, {na}, [na](Node& self) {
    na->ensure_grad();
    double g = self.grad[0];
    for (auto& v : na->grad) v += g;
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  const auto& sh = x.shape();
  if (sh.empty()) throw std::invalid_argument("layer_norm: rank-0 input");
  std::size_t D = sh.back();
  if (gamma.shape() != Shape{D} || beta.shape() != Shape{D}) {
    throw std::invalid_argument("layer_norm: affine params must have shape (" +
                                std::to_string(D) + ",)");
  }
  std::size_t rows = x.size() / D;
  std::vector<double> out(x.size()), xhat(x.size()), inv_std(rows);
  const auto dx = x.data(), dg = gamma.data(), db = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = dx.data() + r * D;
    double mu = 0.0;
    for (std::size_t i = 0; i < D; ++i) mu += row[i];
    mu /= static_cast<double>(D);
    double var = 0.0;
    for (std::size_t i = 0; i < D; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(D);
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t i = 0; i < D; ++i) {
      double h = (row[i] - mu) * is;
      xhat[r * D + i] = h;
      out[r * D + i] = dg[i] * h + db[i];
    }
  }
  auto nx = x.node(), ng = gamma.node(), nb = beta.node();
  return op_result(
      "layer_norm", sh, std::move(out), {nx, ng, nb},
      [nx, ng, nb, xhat, inv_std, D, rows](Node& self) {
        if (ng->requires_grad) ng->ensure_grad();
        if (nb->requires_grad) nb->ensure_grad();
        if (nx->requires_grad) nx->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* g = self.grad.data() + r * D;
          const double* h = xhat.data() + r * D;
          if (ng->requires_grad)
            for (std::size_t i = 0; i < D; ++i) ng->grad[i] += g[i] * h[i];
          if (nb->requires_grad)
            for (std::size_t i = 0; i < D; ++i) nb->grad[i] += g[i];
          if (nx->requires_grad) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t i = 0; i < D; ++i) {
              double gg = g[i] * ng->data[i];
              m1 += gg;
              m2 += gg * h[i];
            }
            m1 /= static_cast<double>(D);
            m2 /= static_cast<double>(D);
            for (std::size_t i = 0; i < D; ++i) {
              double gg = g[i] * ng->data[i];
              nx->grad[r * D + i] += (gg - m1 - h[i] * m2) * inv_std[r];
            }
          }
        }
      });
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng,
               bool training) {
  if (!training || rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
  double keep = 1.0 - rate;
  std::vector<double> mask(x.size());
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (auto& m : mask) m = dist(rng) < keep ? 1.0 / keep : 0.0;
  std::vector<double> out(x.size());
  const auto dx = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dx[i] * mask[i];
  auto nx = x.node();
  return op_result("dropout", x.shape(), std::move(out), {nx},
                   [nx, mask](Node& self) {
                     nx->ensure_grad();
                     for (std::size_t i = 0; i < self.grad.size(); ++i)
                       nx->grad[i] += self.grad[i] * mask[i];
                   });
}

}  // namespace dyad
