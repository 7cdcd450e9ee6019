#pragma once

// Discounted-delay value iteration on the collapsed state space (x, q1, l2).
//
// The infinite state space is truncated to a box [0, x_max] x [0, q1_max] x
// {0, 1}. Arrivals at x = x_max and processing completions at q1 = q1_max are
// blocked: the event becomes a self-loop and the holding cost still accrues.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mmsched/core_model.hpp"
#include "mmsched/errors.hpp"

namespace mmsched {

struct TruncationBox {
  int x_max = 60;
  int q1_max = 60;

  void validate() const {
    if (x_max < 4 || q1_max < 4) {
      throw InvalidConfig("truncation box must be at least 4x4, got " + std::to_string(x_max) + "x" +
                          std::to_string(q1_max));
    }
  }
  constexpr bool contains(const CollapsedState& s) const {
    return s.x >= 0 && s.x <= x_max && s.q1 >= 0 && s.q1 <= q1_max && (s.l2 == 0 || s.l2 == 1);
  }
  /// True when s stays at least `band` cells away from the upper faces.
  constexpr bool in_interior(const CollapsedState& s, int band) const {
    return contains(s) && s.x <= x_max - band && s.q1 <= q1_max - band;
  }
  constexpr std::size_t size() const {
    return static_cast<std::size_t>(x_max + 1) * static_cast<std::size_t>(q1_max + 1) * 2;
  }
  constexpr std::size_t index(int x, int q1, int l2) const {
    return (static_cast<std::size_t>(x) * static_cast<std::size_t>(q1_max + 1) + static_cast<std::size_t>(q1)) *
               2 +
           static_cast<std::size_t>(l2);
  }
  friend constexpr bool operator==(const TruncationBox&, const TruncationBox&) = default;
};

/// Dense value function on a truncation box.
class ValueTable {
 public:
  ValueTable() = default;
  ValueTable(TruncationBox box, double beta) : box_(box), values_(box.size(), 0.0), beta_(beta) {}

  /// J0(x, q1, l2) = x + q1 + l2.
  static ValueTable initial(TruncationBox box, double beta) {
    box.validate();
    ValueTable v(box, beta);
    for (int x = 0; x <= box.x_max; ++x)
      for (int q1 = 0; q1 <= box.q1_max; ++q1)
        for (int l2 = 0; l2 <= 1; ++l2) v(x, q1, l2) = static_cast<double>(x + q1 + l2);
    return v;
  }

  const TruncationBox& box() const { return box_; }
  double beta() const { return beta_; }
  std::size_t iteration_count() const { return iteration_count_; }
  void set_iteration_count(std::size_t n) { iteration_count_ = n; }

  double& operator()(int x, int q1, int l2) { return values_[box_.index(x, q1, l2)]; }
  double operator()(int x, int q1, int l2) const { return values_[box_.index(x, q1, l2)]; }
  double operator()(const CollapsedState& s) const { return (*this)(s.x, s.q1, s.l2); }

  double at(const CollapsedState& s) const {
    if (!box_.contains(s)) throw OutOfBox("state " + to_string(s) + " is outside the truncation box");
    return (*this)(s);
  }

  std::vector<double>& data() { return values_; }
  const std::vector<double>& data() const { return values_; }

  double sup_distance(const ValueTable& other) const {
    double d = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) d = std::max(d, std::abs(values_[i] - other.values_[i]));
    return d;
  }

 private:
  TruncationBox box_{};
  std::vector<double> values_;
  std::size_t iteration_count_ = 0;
  double beta_ = 0.0;
};

enum class Sub6Choice : std::uint8_t { NotApplicable, NotAdding, Adding };

namespace detail {

/// Collapsed state reached by the adding-to-sub-6 branch from (x, q1, 0), if
/// one exists: head buffer or processing server first, then the mmWave queue.
constexpr std::optional<CollapsedState> adding_target(int x, int q1) {
  if (x >= 1) return CollapsedState{x - 1, q1, 1};
  if (q1 >= 1) return CollapsedState{0, q1 - 1, 1};
  return std::nullopt;
}

}  // namespace detail

/// Binary sub-6 decision for every collapsed state with l2 = 0.
class PolicyTable {
 public:
  PolicyTable() = default;
  explicit PolicyTable(TruncationBox box)
      : box_(box), choice_(static_cast<std::size_t>(box.x_max + 1) * static_cast<std::size_t>(box.q1_max + 1),
                           Sub6Choice::NotAdding) {
    choice_[0] = Sub6Choice::NotApplicable;
  }

  /// The decision table of the threshold policy D_m: add to sub-6 exactly
  /// when the FastLane occupancy x + q1 exceeds m.
  static PolicyTable from_threshold(TruncationBox box, int m) {
    PolicyTable pt(box);
    for (int x = 0; x <= box.x_max; ++x)
      for (int q1 = 0; q1 <= box.q1_max; ++q1)
        if (x + q1 >= 1) pt.set(x, q1, x + q1 > m ? Sub6Choice::Adding : Sub6Choice::NotAdding);
    return pt;
  }

  const TruncationBox& box() const { return box_; }

  Sub6Choice choice(int x, int q1) const { return choice_[slot(x, q1)]; }
  void set(int x, int q1, Sub6Choice c) {
    if (c == Sub6Choice::Adding && !detail::adding_target(x, q1)) {
      throw InadmissibleAction("adding to sub-6 is not admissible at " + to_string(CollapsedState{x, q1, 0}));
    }
    choice_[slot(x, q1)] = c;
  }

  /// Concrete action taken in the 4-D representative expand(s) of s.
  Action action(const CollapsedState& s) const {
    if (!box_.contains(s)) throw OutOfBox("state " + to_string(s) + " is outside the policy box");
    if (s.l2 == 1 || choice(s.x, s.q1) != Sub6Choice::Adding) return Action::Hold;
    const SystemState q = expand(s);
    if (q.q0 >= 1) return Action::ScheduleOnSub6;
    return resolve_renege(q);
  }

  friend bool operator==(const PolicyTable&, const PolicyTable&) = default;

 private:
  std::size_t slot(int x, int q1) const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(box_.q1_max + 1) + static_cast<std::size_t>(q1);
  }

  TruncationBox box_{};
  std::vector<Sub6Choice> choice_;
};

/// T(v)(s): v(s) when s = 0 or l2 = 1; otherwise the smaller of keeping the
/// sub-6 server idle and moving one FastLane packet onto it.
inline double intermediate_value(const ValueTable& v, const CollapsedState& s) {
  if (!v.box().contains(s)) throw OutOfBox("state " + to_string(s) + " is outside the truncation box");
  if (s.l2 == 1) return v(s);
  const auto target = detail::adding_target(s.x, s.q1);
  if (!target) return v(s);
  return std::min(v(s), v(*target));
}

/// Decision implied by v at every l2 = 0 state. Ties keep the sub-6 server idle.
inline PolicyTable extract_policy(const ValueTable& v) {
  const TruncationBox& box = v.box();
  PolicyTable pt(box);
  for (int x = 0; x <= box.x_max; ++x) {
    for (int q1 = 0; q1 <= box.q1_max; ++q1) {
      const auto target = detail::adding_target(x, q1);
      if (!target) continue;
      pt.set(x, q1, v(*target) < v(x, q1, 0) ? Sub6Choice::Adding : Sub6Choice::NotAdding);
    }
  }
  return pt;
}

namespace detail {

inline void fill_intermediate(const ValueTable& v, std::vector<double>& t) {
  const TruncationBox& box = v.box();
  t.resize(box.size());
  for (int x = 0; x <= box.x_max; ++x) {
    for (int q1 = 0; q1 <= box.q1_max; ++q1) {
      const double idle = v(x, q1, 0);
      const auto target = adding_target(x, q1);
      t[box.index(x, q1, 0)] = target ? std::min(idle, v(*target)) : idle;
      t[box.index(x, q1, 1)] = v(x, q1, 1);
    }
  }
}

/// One sweep of the recursion, reading `t` (intermediate values of the
/// previous iterate) and writing into `out`.
inline void sweep(const TruncationBox& box, const RateParams& p, const std::vector<double>& t,
                  std::vector<double>& out) {
  const double lambda = p.lambda;
  const double mm = p.mm_rate();
  const double sub6 = p.mu_sub6;
  const double mu_p = p.mu_p;
  const double beta = p.beta;
  out.resize(box.size());
  for (int x = 0; x <= box.x_max; ++x) {
    for (int q1 = 0; q1 <= box.q1_max; ++q1) {
      for (int l2 = 0; l2 <= 1; ++l2) {
        const double arrival = t[box.index(x < box.x_max ? x + 1 : x, q1, l2)];
        const double mm_dep = t[box.index(x, q1 > 0 ? q1 - 1 : 0, l2)];
        const double sub6_dep = t[box.index(x, q1, 0)];
        double processing;
        if (x == 0) {
          processing = t[box.index(0, q1, l2)];
        } else if (q1 < box.q1_max) {
          processing = t[box.index(x - 1, q1 + 1, l2)];
        } else {
          processing = t[box.index(x, q1, l2)];
        }
        out[box.index(x, q1, l2)] =
            static_cast<double>(x + q1 + l2) +
            beta * (lambda * arrival + mm * mm_dep + sub6 * sub6_dep + mu_p * processing);
      }
    }
  }
}

}  // namespace detail

/// J^{n+1} from J^n. The discount factor is taken from p.
inline ValueTable value_iteration_step(const ValueTable& v, const RateParams& p) {
  require_uniformized(p);
  std::vector<double> t;
  detail::fill_intermediate(v, t);
  ValueTable next(v.box(), p.beta);
  detail::sweep(v.box(), p, t, next.data());
  next.set_iteration_count(v.iteration_count() + 1);
  return next;
}

struct SolveOptions {
  double tol = 1e-9;
  std::size_t max_iter = 5'000'000;
};

struct DiscountedSolution {
  ValueTable values;
  PolicyTable policy;
  std::size_t iterations = 0;
  /// Sup-norm distance between the last two iterates (< tol on success).
  double last_step = 0.0;
  /// Sup-norm bound on the distance to the true fixed point,
  /// beta * last_step / (1 - beta).
  double error_bound = 0.0;
};

/// Called with J^0 and then with every new iterate.
using IterateObserver = std::function<void(const ValueTable&)>;

/// Value iteration from J^0 until successive iterates differ by less than
/// tol in sup norm.
inline DiscountedSolution solve_discounted(const RateParams& p, const TruncationBox& box,
                                           const SolveOptions& opts = {},
                                           const IterateObserver& observer = nullptr) {
  require_uniformized(p);
  box.validate();
  if (!(p.beta >= 0.0 && p.beta < 1.0)) throw InvalidConfig("discount factor must lie in [0, 1)");
  if (!(opts.tol > 0.0)) throw InvalidConfig("tolerance must be positive");

  ValueTable current = ValueTable::initial(box, p.beta);
  ValueTable next(box, p.beta);
  std::vector<double> t;
  if (observer) observer(current);

  double diff = std::numeric_limits<double>::infinity();
  std::size_t n = 0;
  while (n < opts.max_iter) {
    detail::fill_intermediate(current, t);
    detail::sweep(box, p, t, next.data());
    ++n;
    next.set_iteration_count(n);
    diff = next.sup_distance(current);
    std::swap(current, next);
    if (observer) observer(current);
    if (diff < opts.tol) break;
  }
  if (!(diff < opts.tol)) {
    throw NoConvergence("value iteration stopped after " + std::to_string(n) +
                        " iterations with sup-norm step " + std::to_string(diff));
  }
  DiscountedSolution out;
  out.policy = extract_policy(current);
  out.values = std::move(current);
  out.iterations = n;
  out.last_step = diff;
  out.error_bound = p.beta < 1.0 ? p.beta * diff / (1.0 - p.beta) : diff;
  return out;
}

/// Outcome of reading a threshold off a policy table.
struct ThresholdResult {
  enum class Kind { Finite, Infinite, NotThreshold };

  Kind kind = Kind::Infinite;
  /// Finite: the threshold. Infinite: largest FastLane occupancy inspected.
  int m = 0;
  /// NotThreshold: an adding state whose occupancy does not exceed that of
  /// the non-adding witness.
  CollapsedState adding_witness{};
  CollapsedState holding_witness{};

  bool finite() const { return kind == Kind::Finite; }
  bool infinite() const { return kind == Kind::Infinite; }
  bool threshold_type() const { return kind != Kind::NotThreshold; }

  std::string describe() const {
    switch (kind) {
      case Kind::Finite: return std::to_string(m);
      case Kind::Infinite: return "inf";
      case Kind::NotThreshold:
        return "not-threshold: adds at " + to_string(adding_witness) + " but holds at " + to_string(holding_witness);
    }
    return "?";
  }

  /// Same classification and, when finite, the same threshold.
  bool same_threshold(const ThresholdResult& o) const {
    if (kind != o.kind) return false;
    return kind != Kind::Finite || m == o.m;
  }
};

inline constexpr int kDefaultBand = 2;

/// Region of a policy table that a threshold is read from.
struct ThresholdScan {
  /// Cells excluded next to the upper faces of the box.
  int band = kDefaultBand;
  /// Largest x inspected; negative means no limit besides the band.
  int max_x = -1;
};

/// Band that clears the decision distortion of the blocked boundary: the
/// last three or four rows of a solved table hold everywhere.
inline int policy_band(const TruncationBox& box) { return std::max(kDefaultBand, std::min(box.x_max, box.q1_max) / 8); }

/// The rows x <= 1, where the head buffer is empty and the processing server
/// is idle or busy. When processing is much faster than arrivals the chain
/// spends almost all of its time there.
inline ThresholdScan head_empty_scan(const TruncationBox& box) { return {policy_band(box), 1}; }

/// Reads the threshold m off a region of a policy table: adding to sub-6
/// must happen exactly at the states whose FastLane occupancy exceeds m.
inline ThresholdResult extract_threshold(const PolicyTable& pt, const ThresholdScan& scan) {
  const TruncationBox& box = pt.box();
  const int x_hi = scan.max_x >= 0 ? std::min(scan.max_x, box.x_max - scan.band) : box.x_max - scan.band;
  int max_hold = -1;
  int min_add = std::numeric_limits<int>::max();
  int max_seen = 0;
  CollapsedState hold_state{}, add_state{};
  for (int x = 0; x <= x_hi; ++x) {
    for (int q1 = 0; q1 <= box.q1_max - scan.band; ++q1) {
      const Sub6Choice c = pt.choice(x, q1);
      if (c == Sub6Choice::NotApplicable) continue;
      const int y = x + q1;
      max_seen = std::max(max_seen, y);
      if (c == Sub6Choice::Adding) {
        if (y < min_add) {
          min_add = y;
          add_state = {x, q1, 0};
        }
      } else if (y > max_hold) {
        max_hold = y;
        hold_state = {x, q1, 0};
      }
    }
  }
  ThresholdResult r;
  if (min_add == std::numeric_limits<int>::max()) {
    r.kind = ThresholdResult::Kind::Infinite;
    r.m = max_seen;
    return r;
  }
  if (min_add <= max_hold) {
    r.kind = ThresholdResult::Kind::NotThreshold;
    r.adding_witness = add_state;
    r.holding_witness = hold_state;
    return r;
  }
  r.kind = ThresholdResult::Kind::Finite;
  r.m = min_add - 1;
  return r;
}

/// Whole-interior scan with the given band.
inline ThresholdResult extract_threshold(const PolicyTable& pt, int band = kDefaultBand) {
  return extract_threshold(pt, ThresholdScan{band, -1});
}

struct BetaThreshold {
  double beta = 0.0;
  /// Threshold on the scan region used for stabilization.
  ThresholdResult threshold;
  /// Whole-interior reading of the same policy, for reference.
  ThresholdResult interior;
  std::size_t iterations = 0;
};

struct AverageDelayThreshold {
  ThresholdResult threshold;
  std::vector<BetaThreshold> trajectory;
  /// Solution at the last discount factor solved.
  DiscountedSolution solution;
};

inline const std::vector<double>& default_betas() {
  static const std::vector<double> betas = {0.9, 0.99, 0.999, 0.9999, 0.99999};
  return betas;
}

/// Solves the discounted problem for increasing discount factors and returns
/// as soon as two consecutive factors give the same threshold on `scan`
/// (head_empty_scan(box) when not given).
inline AverageDelayThreshold average_delay_threshold(const RateParams& p, const TruncationBox& box,
                                                     const std::vector<double>& betas = default_betas(),
                                                     const SolveOptions& opts = {},
                                                     std::optional<ThresholdScan> scan = std::nullopt) {
  const ThresholdScan region = scan.value_or(head_empty_scan(box));
  if (betas.empty()) throw InvalidConfig("at least one discount factor is required");
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] >= 0.0 && betas[i] < 1.0)) throw InvalidConfig("discount factors must lie in [0, 1)");
    if (i > 0 && !(betas[i] > betas[i - 1])) throw InvalidConfig("discount factors must be strictly increasing");
  }
  AverageDelayThreshold out;
  for (double beta : betas) {
    RateParams pb = p;
    pb.beta = beta;
    DiscountedSolution sol = solve_discounted(pb, box, opts);
    const ThresholdResult thr = extract_threshold(sol.policy, region);
    out.trajectory.push_back({beta, thr, extract_threshold(sol.policy, policy_band(box)), sol.iterations});
    out.solution = std::move(sol);
    if (!thr.threshold_type()) {
      throw NotThresholdType("policy at beta=" + std::to_string(beta) + " is " + thr.describe());
    }
    const std::size_t k = out.trajectory.size();
    if (k >= 2 && out.trajectory[k - 2].threshold.same_threshold(thr)) {
      out.threshold = thr;
      return out;
    }
  }
  std::string traj;
  for (const auto& bt : out.trajectory) traj += " " + std::to_string(bt.beta) + "->" + bt.threshold.describe();
  throw NoStabilization("threshold still moving at the largest discount factor:" + traj);
}

}  // namespace mmsched
