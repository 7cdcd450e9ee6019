#pragma once

// Numerical checks of the structural inequalities satisfied by the optimal
// discounted delay: the priority relations between actions on the 4-D
// fixed point, the class-F inequalities (threshold, switch, supermodularity,
// monotonicity) and their extended convexity/exchange consequences on every
// value-iteration iterate, and the threshold trajectory across iterations.
//
// Every check scans its whole region and records every violation.

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mmsched/bellman4d.hpp"
#include "mmsched/core_model.hpp"
#include "mmsched/mdp_solver.hpp"

namespace mmsched {

inline constexpr double kDefaultVerifyTol = 1e-7;

struct Violation {
  std::string property_id;
  std::string states;
  double lhs = 0.0;
  double rhs = 0.0;
  /// Fixed-point checks carry no iteration number.
  std::optional<std::size_t> iteration;

  double gap() const { return lhs - rhs; }
};

class ViolationReport {
 public:
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Violation>& entries() const { return entries_; }

  void add(Violation v) { entries_.push_back(std::move(v)); }
  void merge(const ViolationReport& other) {
    entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
  }
  std::size_t count(const std::string& property_id) const {
    std::size_t n = 0;
    for (const auto& v : entries_) n += v.property_id == property_id ? 1 : 0;
    return n;
  }

  /// CSV with header property_id,state,lhs,rhs,gap,iteration.
  void write_csv(std::ostream& os) const {
    os << "property_id,state,lhs,rhs,gap,iteration\n";
    os.precision(17);
    for (const auto& v : entries_) {
      os << v.property_id << ',' << v.states << ',' << v.lhs << ',' << v.rhs << ',' << v.gap() << ',';
      if (v.iteration) {
        os << *v.iteration;
      } else {
        os << "fixed-point";
      }
      os << '\n';
    }
  }

 private:
  std::vector<Violation> entries_;
};

namespace detail {

/// Records lhs <= rhs + tol failures.
class InequalityScan {
 public:
  InequalityScan(ViolationReport& report, double tol, std::optional<std::size_t> iteration)
      : report_(report), tol_(tol), iteration_(iteration) {}

  template <typename StatesFn>
  void leq(const char* id, double lhs, double rhs, StatesFn&& states) {
    if (lhs > rhs + tol_) report_.add({id, states(), lhs, rhs, iteration_});
  }

 private:
  ViolationReport& report_;
  double tol_;
  std::optional<std::size_t> iteration_;
};

inline std::string join_states(std::initializer_list<CollapsedState> states) {
  std::string out;
  for (const auto& s : states) {
    if (!out.empty()) out += ' ';
    out += to_string(s);
  }
  return out;
}

inline std::string join_states(std::initializer_list<SystemState> states) {
  std::string out;
  for (const auto& s : states) {
    if (!out.empty()) out += ' ';
    out += to_string(s);
  }
  return out;
}

}  // namespace detail

/// Inequalities (6)-(14) on a collapsed value function. Every state an
/// inequality touches must lie in the interior (band cells away from the
/// upper faces of the box).
inline ViolationReport check_class_F(const ValueTable& f, double tol = kDefaultVerifyTol, int band = kDefaultBand,
                                     std::optional<std::size_t> iteration = std::nullopt) {
  ViolationReport report;
  detail::InequalityScan scan(report, tol, iteration ? iteration : std::optional<std::size_t>(f.iteration_count()));
  const int xm = f.box().x_max - band;
  const int qm = f.box().q1_max - band;
  using detail::join_states;
  using S = CollapsedState;

  for (int x = 0; x <= xm; ++x) {
    for (int q = 0; q <= qm; ++q) {
      // (6) f(x+1,q,0) + f(x+1,q,1) <= f(x,q,1) + f(x+2,q,0)
      if (x + 2 <= xm) {
        scan.leq("Eq(6)", f(x + 1, q, 0) + f(x + 1, q, 1), f(x, q, 1) + f(x + 2, q, 0),
                 [&] { return join_states({S{x + 1, q, 0}, S{x + 1, q, 1}, S{x, q, 1}, S{x + 2, q, 0}}); });
      }
      // (7) f(x+1,q,0) + f(x,q+1,1) <= f(x,q,1) + f(x+1,q+1,0)
      if (x + 1 <= xm && q + 1 <= qm) {
        scan.leq("Eq(7)", f(x + 1, q, 0) + f(x, q + 1, 1), f(x, q, 1) + f(x + 1, q + 1, 0),
                 [&] { return join_states({S{x + 1, q, 0}, S{x, q + 1, 1}, S{x, q, 1}, S{x + 1, q + 1, 0}}); });
      }
      // (8) f(0,q+1,0) + f(0,q+1,1) <= f(0,q,1) + f(0,q+2,0)
      if (x == 0 && q + 2 <= qm) {
        scan.leq("Eq(8)", f(0, q + 1, 0) + f(0, q + 1, 1), f(0, q, 1) + f(0, q + 2, 0),
                 [&] { return join_states({S{0, q + 1, 0}, S{0, q + 1, 1}, S{0, q, 1}, S{0, q + 2, 0}}); });
      }
      for (int l2 = 0; l2 <= 1; ++l2) {
        // (9) f(x,q+1,l2) <= f(x+1,q,l2)
        if (x + 1 <= xm && q + 1 <= qm) {
          scan.leq("Eq(9)", f(x, q + 1, l2), f(x + 1, q, l2),
                   [&] { return join_states({S{x, q + 1, l2}, S{x + 1, q, l2}}); });
        }
        // (12) f(x,q,l2) <= f(x+1,q,l2)
        if (x + 1 <= xm) {
          scan.leq("Eq(12)", f(x, q, l2), f(x + 1, q, l2),
                   [&] { return join_states({S{x, q, l2}, S{x + 1, q, l2}}); });
        }
        // (13) f(x,q,l2) <= f(x,q+1,l2)
        if (q + 1 <= qm) {
          scan.leq("Eq(13)", f(x, q, l2), f(x, q + 1, l2),
                   [&] { return join_states({S{x, q, l2}, S{x, q + 1, l2}}); });
        }
      }
      // (10) f(x,q,1) + f(x+1,q,0) <= f(x,q,0) + f(x+1,q,1)
      if (x + 1 <= xm) {
        scan.leq("Eq(10)", f(x, q, 1) + f(x + 1, q, 0), f(x, q, 0) + f(x + 1, q, 1),
                 [&] { return join_states({S{x, q, 1}, S{x + 1, q, 0}, S{x, q, 0}, S{x + 1, q, 1}}); });
      }
      // (11) f(x,q,1) + f(x,q+1,0) <= f(x,q,0) + f(x,q+1,1)
      if (q + 1 <= qm) {
        scan.leq("Eq(11)", f(x, q, 1) + f(x, q + 1, 0), f(x, q, 0) + f(x, q + 1, 1),
                 [&] { return join_states({S{x, q, 1}, S{x, q + 1, 0}, S{x, q, 0}, S{x, q + 1, 1}}); });
      }
      // (14) f(x,q,0) <= f(x,q,1)
      scan.leq("Eq(14)", f(x, q, 0), f(x, q, 1), [&] { return join_states({S{x, q, 0}, S{x, q, 1}}); });
    }
  }
  return report;
}

/// The eight convexity/exchange inequalities derived from class F, numbered
/// (15)-(22) in order of appearance.
inline ViolationReport check_extended_props(const ValueTable& f, double tol = kDefaultVerifyTol,
                                            int band = kDefaultBand,
                                            std::optional<std::size_t> iteration = std::nullopt) {
  ViolationReport report;
  detail::InequalityScan scan(report, tol, iteration ? iteration : std::optional<std::size_t>(f.iteration_count()));
  const int xm = f.box().x_max - band;
  const int qm = f.box().q1_max - band;
  using detail::join_states;
  using S = CollapsedState;

  for (int x = 0; x <= xm; ++x) {
    for (int q = 0; q <= qm; ++q) {
      // (15) 2f(x,q,1) <= f(x+1,q,1) + f(x-1,q,1)
      if (x >= 1 && x + 1 <= xm) {
        scan.leq("Eq(15)", 2.0 * f(x, q, 1), f(x + 1, q, 1) + f(x - 1, q, 1),
                 [&] { return join_states({S{x, q, 1}, S{x + 1, q, 1}, S{x - 1, q, 1}}); });
      }
      if (x == 0 && q >= 1 && q + 1 <= qm) {
        // (16) 2f(0,q,1) <= f(1,q,1) + f(0,q-1,1)
        scan.leq("Eq(16)", 2.0 * f(0, q, 1), f(1, q, 1) + f(0, q - 1, 1),
                 [&] { return join_states({S{0, q, 1}, S{1, q, 1}, S{0, q - 1, 1}}); });
        // (17) 2f(0,q,1) <= f(0,q+1,1) + f(0,q-1,1)
        scan.leq("Eq(17)", 2.0 * f(0, q, 1), f(0, q + 1, 1) + f(0, q - 1, 1),
                 [&] { return join_states({S{0, q, 1}, S{0, q + 1, 1}, S{0, q - 1, 1}}); });
      }
      // (18) 2f(x+1,q,0) <= f(x+2,q,0) + f(x,q,0)
      if (x + 2 <= xm) {
        scan.leq("Eq(18)", 2.0 * f(x + 1, q, 0), f(x + 2, q, 0) + f(x, q, 0),
                 [&] { return join_states({S{x + 1, q, 0}, S{x + 2, q, 0}, S{x, q, 0}}); });
      }
      if (x == 0 && q + 2 <= qm) {
        // (19) 2f(0,q+1,0) <= f(0,q,0) + f(0,q+2,0)
        scan.leq("Eq(19)", 2.0 * f(0, q + 1, 0), f(0, q, 0) + f(0, q + 2, 0),
                 [&] { return join_states({S{0, q + 1, 0}, S{0, q, 0}, S{0, q + 2, 0}}); });
      }
      // (20) f(x,q,1) + f(x-1,q+1,1) <= f(x,q+1,1) + f(x-1,q,1)
      if (x >= 1 && q + 1 <= qm) {
        scan.leq("Eq(20)", f(x, q, 1) + f(x - 1, q + 1, 1), f(x, q + 1, 1) + f(x - 1, q, 1),
                 [&] { return join_states({S{x, q, 1}, S{x - 1, q + 1, 1}, S{x, q + 1, 1}, S{x - 1, q, 1}}); });
      }
      // (21) f(0,q+1,0) + f(0,q+1,1) <= f(0,q,1) + f(1,q+1,0)
      if (x == 0 && q + 1 <= qm) {
        scan.leq("Eq(21)", f(0, q + 1, 0) + f(0, q + 1, 1), f(0, q, 1) + f(1, q + 1, 0),
                 [&] { return join_states({S{0, q + 1, 0}, S{0, q + 1, 1}, S{0, q, 1}, S{1, q + 1, 0}}); });
      }
      // (22) f(x+1,q,0) + f(x,q+1,0) <= f(x+1,q+1,0) + f(x,q,0)
      if (x + 1 <= xm && q + 1 <= qm) {
        scan.leq("Eq(22)", f(x + 1, q, 0) + f(x, q + 1, 0), f(x + 1, q + 1, 0) + f(x, q, 0),
                 [&] { return join_states({S{x + 1, q, 0}, S{x, q + 1, 0}, S{x + 1, q + 1, 0}, S{x, q, 0}}); });
      }
    }
  }
  return report;
}

struct IterationThresholdCheck {
  std::vector<ThresholdResult> per_iteration;
  bool monotone_ok = true;
  ViolationReport violations;
};

/// Every per-iteration policy must be threshold-type and consecutive
/// thresholds must satisfy i_{n+1} <= i_n + 1. An infinite threshold (no
/// adding decision observed) places no bound on its successor.
inline IterationThresholdCheck check_iteration_thresholds(const std::vector<ThresholdResult>& trajectory) {
  IterationThresholdCheck out;
  out.per_iteration = trajectory;
  for (std::size_t n = 0; n < trajectory.size(); ++n) {
    const ThresholdResult& cur = trajectory[n];
    if (!cur.threshold_type()) {
      out.violations.add({"Lemma2", detail::join_states({cur.adding_witness, cur.holding_witness}),
                          static_cast<double>(cur.adding_witness.fastlane()),
                          static_cast<double>(cur.holding_witness.fastlane()), n});
      continue;
    }
    if (n == 0) continue;
    const ThresholdResult& prev = trajectory[n - 1];
    if (!prev.threshold_type() || prev.infinite()) continue;
    const double bound = static_cast<double>(prev.m) + 1.0;
    const double next = cur.infinite() ? std::numeric_limits<double>::infinity() : static_cast<double>(cur.m);
    if (next > bound) {
      out.monotone_ok = false;
      out.violations.add({"Thm3", "i_n=" + std::to_string(prev.m) + " i_n+1=" + cur.describe(), next, bound, n});
    }
  }
  return out;
}

inline IterationThresholdCheck check_iteration_thresholds(const std::vector<PolicyTable>& policies,
                                                          int band = kDefaultBand) {
  std::vector<ThresholdResult> trajectory;
  trajectory.reserve(policies.size());
  for (const auto& pt : policies) trajectory.push_back(extract_threshold(pt, band));
  return check_iteration_thresholds(trajectory);
}

inline IterationThresholdCheck check_iteration_thresholds(const std::vector<int>& thresholds) {
  std::vector<ThresholdResult> trajectory;
  for (int m : thresholds) {
    ThresholdResult r;
    r.kind = ThresholdResult::Kind::Finite;
    r.m = m;
    trajectory.push_back(r);
  }
  return check_iteration_thresholds(trajectory);
}

/// Value-inequality band for a box. The blocked boundary perturbs values a
/// little more than half the box away from the upper faces, so only the
/// corner nearest the origin is checked: band = 5/8 of the smaller side.
inline int verification_band(const TruncationBox& box) {
  const int side = std::min(box.x_max, box.q1_max);
  return side / 2 + side / 8;
}

namespace detail {

/// True when q and every state within one step of it stay band cells away
/// from the upper faces of the 4-D box.
inline bool interior_4d(const SystemState& q, const TruncationBox& box, int band) {
  return q.valid() && q.q0 + q.l1 + 2 <= box.x_max - band && q.q1 + 1 <= box.q1_max - band;
}

}  // namespace detail

/// Priority relations (a)-(e) on a converged 4-D value function. (e) is
/// checked as monotonicity along each coordinate, which gives componentwise
/// dominance by chaining.
inline ViolationReport check_theorem1(const ValueFunction4D& J, const RateParams& p, double tol = kDefaultVerifyTol,
                                      int band = kDefaultBand) {
  if (!check_fastlane_assumption(p)) {
    throw AssumptionViolated("1/(p_a mu_mm) + 1/mu_p must be below 1/mu_sub6");
  }
  ViolationReport report;
  detail::InequalityScan scan(report, tol, std::nullopt);
  using detail::join_states;
  const TruncationBox& box = J.box();
  J.for_each_state([&](const SystemState& q) {
    if (!detail::interior_4d(q, box, band)) return;
    const auto v = [&](Action a) { return J(apply_action_unchecked(q, a)); };
    const auto at = [&](Action a) { return apply_action_unchecked(q, a); };

    if (is_admissible(q, Action::ScheduleOnMmWave)) {
      scan.leq("Thm1(a)", v(Action::ScheduleOnMmWave), J(q),
               [&] { return join_states({at(Action::ScheduleOnMmWave), q}); });
    }
    const Action renege = resolve_renege(q);
    if (is_admissible(q, Action::ScheduleOnSub6) && renege != Action::Hold) {
      scan.leq("Thm1(b)", v(Action::ScheduleOnSub6), v(renege),
               [&] { return join_states({at(Action::ScheduleOnSub6), at(renege)}); });
    }
    if (q.l1 == 1) {
      const SystemState t = apply_event(q, Event::ProcessingCompletion);
      scan.leq("Thm1(c)", J(t), J(q), [&] { return join_states({t, q}); });
    }
    if (q.q0 >= 1 && q.l1 == 0 && q.q1 == 0 && q.l2 == 0) {
      scan.leq("Thm1(d)", v(Action::ScheduleOnMmWave), v(Action::ScheduleOnSub6),
               [&] { return join_states({at(Action::ScheduleOnMmWave), at(Action::ScheduleOnSub6)}); });
    }
    const std::array<SystemState, 4> ups = {SystemState{q.q0 + 1, q.l1, q.q1, q.l2},
                                            SystemState{q.q0, q.l1 + 1, q.q1, q.l2},
                                            SystemState{q.q0, q.l1, q.q1 + 1, q.l2},
                                            SystemState{q.q0, q.l1, q.q1, q.l2 + 1}};
    for (const SystemState& y : ups) {
      if (!y.valid()) continue;
      scan.leq("Thm1(e)", J(q), J(y), [&] { return join_states({q, y}); });
    }
  });
  return report;
}

/// Where both reneging variants are admissible, moving the processing-server
/// packet is at least as good as moving one from the mmWave queue.
inline ViolationReport check_renege_preference(const ValueFunction4D& J, double tol = kDefaultVerifyTol,
                                               int band = kDefaultBand) {
  ViolationReport report;
  detail::InequalityScan scan(report, tol, std::nullopt);
  J.for_each_state([&](const SystemState& q) {
    if (!detail::interior_4d(q, J.box(), band)) return;
    if (!is_admissible(q, Action::RenegeFromProcessing) || !is_admissible(q, Action::RenegeFromMmWaveQueue)) return;
    const SystemState rp = apply_action_unchecked(q, Action::RenegeFromProcessing);
    const SystemState rmm = apply_action_unchecked(q, Action::RenegeFromMmWaveQueue);
    scan.leq("Rule3", J(rp), J(rmm), [&] { return detail::join_states({rp, rmm}); });
  });
  return report;
}

/// Literal total-count ordering: J(x) <= J(y) whenever x has strictly fewer
/// packets than y. One entry per state y, witnessed by the largest value
/// among states with fewer packets. Informational only.
inline ViolationReport check_total_count_order(const ValueFunction4D& J, double tol = kDefaultVerifyTol,
                                               int band = kDefaultBand) {
  std::vector<std::pair<double, SystemState>> level_max;
  J.for_each_state([&](const SystemState& q) {
    if (!detail::interior_4d(q, J.box(), band)) return;
    const auto n = static_cast<std::size_t>(q.total());
    if (level_max.size() <= n) level_max.resize(n + 1, {-std::numeric_limits<double>::infinity(), {}});
    if (J(q) > level_max[n].first) level_max[n] = {J(q), q};
  });
  for (std::size_t n = 1; n < level_max.size(); ++n) {
    if (level_max[n - 1].first > level_max[n].first) level_max[n] = level_max[n - 1];
  }
  ViolationReport report;
  detail::InequalityScan scan(report, tol, std::nullopt);
  J.for_each_state([&](const SystemState& y) {
    if (!detail::interior_4d(y, J.box(), band) || y.total() == 0) return;
    const auto& [value, witness] = level_max[static_cast<std::size_t>(y.total() - 1)];
    scan.leq("Thm1(e)-total-count", value, J(y), [&] { return detail::join_states({witness, y}); });
  });
  return report;
}

}  // namespace mmsched
