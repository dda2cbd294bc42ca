#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dyad/io.hpp"
#include "dyad/metadata.hpp"

namespace dyad {

// --- statistics ------------------------------------------------------------

// Two-sample Kolmogorov-Smirnov statistic: sup_x |ECDF_a(x) - ECDF_b(x)|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

// Asymptotic two-sample significance at level alpha=0.05:
// D > c(alpha) * sqrt((m+n)/(m*n)) with c(0.05) = 1.358.
inline constexpr double kKsCritical005 = 1.358;
bool ks_significant(double d, std::size_t m, std::size_t n,
                    double c_alpha = kKsCritical005);

// Product-moment correlation; throws on length mismatch, n < 2 or zero
// variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// --- split domain ----------------------------------------------------------

struct SessionParticipant {
  std::string id;
  double age = 0;
  Gender gender = Gender::F;
  std::array<double, 5> ocean{};
};

struct SessionRecord {
  std::string session_id;
  std::array<SessionParticipant, 2> participants;
  bool relationship_known = false;

  // gender pair x age-group pair x relationship bucket, e.g. "FM|ym|K"
  std::string group() const;
};

enum class SplitLabel { Train, Val, Test, Removed };
std::string split_label_name(SplitLabel label);
SplitLabel split_label_from_name(const std::string& name);

struct SplitAssignment {
  std::map<std::string, SplitLabel> by_session;

  std::vector<std::string> sessions_in(SplitLabel label) const;
  // Participant ids per kept split; used for the independence invariant.
  std::set<std::string> participants_in(const std::vector<SessionRecord>& records,
                                        SplitLabel label) const;
  // No participant appears in more than one of train/val/test.
  bool subject_independent(const std::vector<SessionRecord>& records) const;
};

struct SplitWeights {
  double ks = 1.0;
  double correlation = 1.0;
  double val_uniformity = 1.0;
  double test_uniformity = 1.0;
  double retention = 1.0;
  std::array<double, 3> target_ratios{0.8, 0.1, 0.1};  // train/val/test
};

struct SplitCosts {
  double ks = 0;            // distribution similarity across split pairs
  double correlation = 0;   // |r_split - r_global| over variable pairs
  double val_uniformity = 0;
  double test_uniformity = 0;
  double retention = 0;     // removals + ratio deviation

  double total(const SplitWeights& weights) const;
};

SplitCosts split_cost(const SplitAssignment& assignment,
                      const std::vector<SessionRecord>& records,
                      const SplitWeights& weights);

struct OptimizeResult {
  SplitAssignment assignment;
  SplitCosts costs;
  std::vector<double> accepted_totals;  // non-increasing, includes start
  std::vector<std::string> diagnostics;
  bool val_feasible = true;
  bool test_feasible = true;
};

// Greedy split construction: connected components of the participant
// co-occurrence graph seed a feasible assignment, then importance-ordered
// single-session moves are accepted while they strictly lower the cost.
// `on_accept` (optional) observes the assignment after every accepted move.
OptimizeResult greedy_optimize(
    const std::vector<SessionRecord>& records, const SplitWeights& weights,
    std::uint64_t seed, std::size_t max_iters = 1000,
    const std::function<void(const SplitAssignment&)>& on_accept = nullptr);

// Session records derived from a manifest's profiles and session list.
std::vector<SessionRecord> records_from_manifest(const SessionManifest& manifest);

void save_assignment(const std::string& path, const SplitAssignment& assignment);
SplitAssignment load_assignment(const std::string& path);

}  // namespace dyad
