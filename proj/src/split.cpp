#include "dyad/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dyad {

// --- statistics ------------------------------------------------------------

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    double fa = static_cast<double>(i) / static_cast<double>(a.size());
    double fb = static_cast<double>(j) / static_cast<double>(b.size());
    d = std::max(d, std::fabs(fa - fb));
  }
  return d;
}

bool ks_significant(double d, std::size_t m, std::size_t n, double c_alpha) {
  if (m == 0 || n == 0)
    throw std::invalid_argument("ks_significant: empty sample");
  double mn = static_cast<double>(m) * static_cast<double>(n);
  return d > c_alpha * std::sqrt(static_cast<double>(m + n) / mn);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2)
    throw std::invalid_argument("pearson: need at least two points");
  double n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw std::invalid_argument("pearson: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

// --- split domain ----------------------------------------------------------

namespace {

char age_group(double age) {
  if (age < 35) return 'y';
  if (age <= 50) return 'm';
  return 'o';
}

// (gender, age-group) histogram bin, 6 possible bins
std::size_t demo_bin(const SessionParticipant& p) {
  std::size_t g = p.gender == Gender::M ? 1 : 0;
  std::size_t a = age_group(p.age) == 'y' ? 0 : (age_group(p.age) == 'm' ? 1 : 2);
  return g * 3 + a;
}

}  // namespace

std::string SessionRecord::group() const {
  std::string genders, ages;
  for (const auto& p : participants) {
    genders += p.gender == Gender::M ? 'M' : 'F';
    ages += age_group(p.age);
  }
  std::sort(genders.begin(), genders.end());
  std::sort(ages.begin(), ages.end());
  return genders + "|" + ages + "|" + (relationship_known ? "K" : "U");
}

std::string split_label_name(SplitLabel label) {
  switch (label) {
    case SplitLabel::Train: return "train";
    case SplitLabel::Val: return "val";
    case SplitLabel::Test: return "test";
    case SplitLabel::Removed: return "removed";
  }
  throw std::invalid_argument("unknown split label");
}

SplitLabel split_label_from_name(const std::string& name) {
  if (name == "train") return SplitLabel::Train;
  if (name == "val") return SplitLabel::Val;
  if (name == "test") return SplitLabel::Test;
  if (name == "removed") return SplitLabel::Removed;
  throw std::invalid_argument("unknown split label: " + name);
}

std::vector<std::string> SplitAssignment::sessions_in(SplitLabel label) const {
  std::vector<std::string> out;
  for (const auto& [id, l] : by_session)
    if (l == label) out.push_back(id);
  return out;
}

std::set<std::string> SplitAssignment::participants_in(
    const std::vector<SessionRecord>& records, SplitLabel label) const {
  std::set<std::string> out;
  for (const auto& r : records) {
    auto it = by_session.find(r.session_id);
    if (it != by_session.end() && it->second == label) {
      out.insert(r.participants[0].id);
      out.insert(r.participants[1].id);
    }
  }
  return out;
}

bool SplitAssignment::subject_independent(
    const std::vector<SessionRecord>& records) const {
  auto train = participants_in(records, SplitLabel::Train);
  auto val = participants_in(records, SplitLabel::Val);
  auto test = participants_in(records, SplitLabel::Test);
  for (const auto& p : val)
    if (train.count(p)) return false;
  for (const auto& p : test)
    if (train.count(p) || val.count(p)) return false;
  return true;
}

double SplitCosts::total(const SplitWeights& w) const {
  return w.ks * ks + w.correlation * correlation +
         w.val_uniformity * val_uniformity + w.test_uniformity * test_uniformity +
         w.retention * retention;
}

namespace {

struct SplitView {
  std::vector<const SessionRecord*> records;
  std::vector<const SessionParticipant*> people;
};

std::array<SplitView, 3> views_of(const SplitAssignment& assignment,
                                  const std::vector<SessionRecord>& records) {
  std::array<SplitView, 3> out;  // train, val, test
  for (const auto& r : records) {
    auto it = assignment.by_session.find(r.session_id);
    if (it == assignment.by_session.end() || it->second == SplitLabel::Removed)
      continue;
    auto& view = out[static_cast<std::size_t>(it->second)];
    view.records.push_back(&r);
    view.people.push_back(&r.participants[0]);
    view.people.push_back(&r.participants[1]);
  }
  return out;
}

// variable value per participant: gender, age, O, C, E, A, N
double variable_of(const SessionParticipant& p, std::size_t var) {
  if (var == 0) return p.gender == Gender::M ? 1.0 : 0.0;
  if (var == 1) return p.age;
  return p.ocean[var - 2];
}

double ks_component(const std::array<SplitView, 3>& views) {
  double acc = 0;
  std::size_t comparisons = 0;
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b) {
      if (views[a].people.empty() || views[b].people.empty()) continue;
      for (std::size_t trait = 0; trait < 5; ++trait) {
        std::vector<double> xa, xb;
        for (const auto* p : views[a].people) xa.push_back(p->ocean[trait]);
        for (const auto* p : views[b].people) xb.push_back(p->ocean[trait]);
        double d = ks_statistic(xa, xb);
        acc += d + (ks_significant(d, xa.size(), xb.size()) ? 1.0 : 0.0);
        ++comparisons;
      }
    }
  return comparisons == 0 ? 0.0 : acc / static_cast<double>(comparisons);
}

double correlation_component(const std::array<SplitView, 3>& views,
                             const std::vector<SessionRecord>& records) {
  constexpr std::size_t kVars = 7;
  std::vector<const SessionParticipant*> everyone;
  for (const auto& r : records) {
    everyone.push_back(&r.participants[0]);
    everyone.push_back(&r.participants[1]);
  }
  auto corr_or_nan = [](const std::vector<const SessionParticipant*>& people,
                        std::size_t va, std::size_t vb) {
    std::vector<double> x, y;
    for (const auto* p : people) {
      x.push_back(variable_of(*p, va));
      y.push_back(variable_of(*p, vb));
    }
    try {
      return pearson(x, y);
    } catch (const std::invalid_argument&) {
      return std::nan("");  // degenerate sample: skip the pair
    }
  };
  double acc = 0;
  std::size_t counted = 0;
  for (std::size_t va = 0; va < kVars; ++va)
    for (std::size_t vb = va + 1; vb < kVars; ++vb) {
      double global = corr_or_nan(everyone, va, vb);
      if (std::isnan(global)) continue;
      for (const auto& view : views) {
        if (view.people.size() < 2) continue;
        double local = corr_or_nan(view.people, va, vb);
        if (std::isnan(local)) continue;
        acc += std::fabs(local - global);
        ++counted;
      }
    }
  return counted == 0 ? 0.0 : acc / static_cast<double>(counted);
}

// Total-variation distance of the (gender x age-group) histogram from the
// uniform distribution; an empty split costs the maximum of 1.
double uniformity_component(const SplitView& view) {
  if (view.people.empty()) return 1.0;
  std::array<double, 6> hist{};
  for (const auto* p : view.people)
    hist[demo_bin(*p)] += 1.0 / static_cast<double>(view.people.size());
  double tv = 0;
  for (double h : hist) tv += std::fabs(h - 1.0 / 6.0);
  return tv / 2.0;
}

double retention_component(const SplitAssignment& assignment,
                           const std::vector<SessionRecord>& records,
                           const SplitWeights& weights) {
  if (records.empty()) return 0.0;
  std::array<double, 4> counts{};  // train, val, test, removed
  for (const auto& r : records) {
    auto it = assignment.by_session.find(r.session_id);
    auto label = it == assignment.by_session.end() ? SplitLabel::Removed
                                                   : it->second;
    counts[static_cast<std::size_t>(label)] += 1.0;
  }
  double n = static_cast<double>(records.size());
  double cost = counts[3] / n;  // removals forfeit data
  for (std::size_t i = 0; i < 3; ++i)
    cost += std::fabs(counts[i] / n - weights.target_ratios[i]);
  return cost;
}

}  // namespace

SplitCosts split_cost(const SplitAssignment& assignment,
                      const std::vector<SessionRecord>& records,
                      const SplitWeights& weights) {
  auto views = views_of(assignment, records);
  SplitCosts c;
  c.ks = ks_component(views);
  c.correlation = correlation_component(views, records);
  c.val_uniformity = uniformity_component(views[1]);
  c.test_uniformity = uniformity_component(views[2]);
  c.retention = retention_component(assignment, records, weights);
  return c;
}

// --- greedy optimization ---------------------------------------------------

namespace {

// Connected components of the participant co-occurrence graph; sessions in
// one component must land in the same kept split.
std::vector<std::vector<std::size_t>> session_components(
    const std::vector<SessionRecord>& records) {
  std::map<std::string, std::size_t> root_of;
  std::vector<std::size_t> parent(records.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (std::size_t i = 0; i < records.size(); ++i)
    for (const auto& p : records[i].participants) {
      auto [it, fresh] = root_of.try_emplace(p.id, i);
      if (!fresh) parent[find(i)] = find(it->second);
    }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i)
    groups[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return out;
}

// Moving one session is legal when its participants touch no other kept
// split through their remaining sessions.
bool move_legal(const std::vector<SessionRecord>& records,
                const SplitAssignment& assignment, std::size_t session,
                SplitLabel to) {
  if (to == SplitLabel::Removed) return true;
  const auto& moved = records[session];
  for (const auto& r : records) {
    if (r.session_id == moved.session_id) continue;
    auto it = assignment.by_session.find(r.session_id);
    if (it == assignment.by_session.end() || it->second == SplitLabel::Removed ||
        it->second == to)
      continue;
    for (const auto& a : r.participants)
      for (const auto& b : moved.participants)
        if (a.id == b.id) return false;
  }
  return true;
}

}  // namespace

OptimizeResult greedy_optimize(
    const std::vector<SessionRecord>& records, const SplitWeights& weights,
    std::uint64_t seed, std::size_t max_iters,
    const std::function<void(const SplitAssignment&)>& on_accept) {
  if (records.size() < 3)
    throw std::invalid_argument("greedy_optimize: need at least 3 sessions");
  for (const auto& r : records)
    if (r.participants[0].id == r.participants[1].id)
      throw std::invalid_argument("greedy_optimize: session " + r.session_id +
                                  " repeats a participant");

  OptimizeResult result;
  auto components = session_components(records);

  // Seed: place whole components where the relative ratio deficit is
  // largest (first-fit ties resolve toward train). The algorithm is fully
  // deterministic; `seed` is accepted for interface stability.
  (void)seed;
  std::array<double, 3> want = weights.target_ratios;
  std::array<double, 3> have{};
  for (const auto& comp : components) {
    std::size_t best = 0;
    double best_deficit = -1e300;
    for (std::size_t s = 0; s < 3; ++s) {
      double deficit =
          want[s] - have[s] / static_cast<double>(records.size());
      if (deficit > best_deficit + 1e-12) {
        best_deficit = deficit;
        best = s;
      }
    }
    for (std::size_t idx : comp)
      result.assignment.by_session[records[idx].session_id] =
          static_cast<SplitLabel>(best);
    have[best] += static_cast<double>(comp.size());
  }

  if (!result.assignment.subject_independent(records))
    throw std::logic_error("greedy_optimize: seeding violated independence");

  // Importance: sessions whose participants have the most remaining
  // sessions move first — they constrain the split the most.
  std::map<std::string, std::size_t> sessions_per_participant;
  for (const auto& r : records)
    for (const auto& p : r.participants) ++sessions_per_participant[p.id];
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  auto importance = [&](std::size_t i) {
    return sessions_per_participant[records[i].participants[0].id] +
           sessions_per_participant[records[i].participants[1].id];
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return importance(a) > importance(b);
  });

  double current = split_cost(result.assignment, records, weights).total(weights);
  result.accepted_totals.push_back(current);

  const SplitLabel labels[] = {SplitLabel::Train, SplitLabel::Val,
                               SplitLabel::Test, SplitLabel::Removed};
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    double best_total = current;
    std::size_t best_session = 0;
    SplitLabel best_to = SplitLabel::Train;
    bool found = false;
    for (std::size_t i : order) {
      auto from = result.assignment.by_session[records[i].session_id];
      for (SplitLabel to : labels) {
        if (to == from) continue;
        if (!move_legal(records, result.assignment, i, to)) continue;
        result.assignment.by_session[records[i].session_id] = to;
        double total =
            split_cost(result.assignment, records, weights).total(weights);
        result.assignment.by_session[records[i].session_id] = from;
        if (total < best_total - 1e-12) {
          best_total = total;
          best_session = i;
          best_to = to;
          found = true;
        }
      }
    }
    if (!found) break;
    result.assignment.by_session[records[best_session].session_id] = best_to;
    current = best_total;
    result.accepted_totals.push_back(current);
    if (!result.assignment.subject_independent(records))
      throw std::logic_error("greedy_optimize: move violated independence");
    if (on_accept) on_accept(result.assignment);
  }

  result.costs = split_cost(result.assignment, records, weights);
  result.val_feasible =
      !result.assignment.participants_in(records, SplitLabel::Val).empty();
  result.test_feasible =
      !result.assignment.participants_in(records, SplitLabel::Test).empty();
  if (!result.val_feasible)
    result.diagnostics.push_back(
        "validation split is empty: participant graph too connected to carve "
        "out an independent subset");
  if (!result.test_feasible)
    result.diagnostics.push_back(
        "test split is empty: participant graph too connected to carve out an "
        "independent subset");
  return result;
}

std::vector<SessionRecord> records_from_manifest(const SessionManifest& manifest) {
  std::vector<SessionRecord> out;
  for (const auto& s : manifest.sessions) {
    SessionRecord r;
    r.session_id = s.session_id;
    r.relationship_known = s.relationship_known;
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& profile = manifest.profile(s.participants[i]);
      r.participants[i] = {profile.id, profile.age, profile.gender,
                           profile.ocean};
    }
    out.push_back(std::move(r));
  }
  return out;
}

void save_assignment(const std::string& path, const SplitAssignment& assignment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "session_id,split\n";
  for (const auto& [id, label] : assignment.by_session)
    out << id << ',' << split_label_name(label) << '\n';
}

SplitAssignment load_assignment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  SplitAssignment out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("malformed assignment line: " + line);
    out.by_session[line.substr(0, comma)] =
        split_label_from_name(line.substr(comma + 1));
  }
  return out;
}

}  // namespace dyad
