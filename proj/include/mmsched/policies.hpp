#pragma once

// Decision rules: the threshold policy D_m, a backpressure (MaxWeight)
// baseline and the mmWave-only baseline.
//
// A decision rule maps a post-event state to one action. Several actions may
// be needed in one epoch (e.g. a processing completion frees the processing
// server while the sub-6 server is also idle), so rules are applied until
// they return Hold.

#include <functional>
#include <limits>
#include <string>

#include "mmsched/core_model.hpp"
#include "mmsched/errors.hpp"

namespace mmsched {

struct ThresholdPolicy {
  int m = 0;

  explicit ThresholdPolicy(int threshold = 0) : m(threshold) {
    if (m < 0) throw InvalidConfig("threshold must be nonnegative, got " + std::to_string(m));
  }
};

/// The D_m case table. Cases are mutually exclusive; anything not covered
/// holds.
constexpr Action dm_decide(const SystemState& s, int m) {
  const int q0 = s.q0, l1 = s.l1, q1 = s.q1, l2 = s.l2;
  if (q0 >= 1 && l1 == 0 && l2 == 1) return Action::ScheduleOnMmWave;
  if (q0 >= 1 && l1 == 0 && l2 == 0 && q0 + q1 <= m) return Action::ScheduleOnMmWave;
  if (q0 >= 1 && l1 == 1 && l2 == 0 && q0 + q1 + 1 > m) return Action::ScheduleOnSub6;
  if (q0 == 1 && l1 == 0 && l2 == 0 && q1 >= m) return Action::ScheduleOnSub6;
  if (q0 == 0 && l2 == 0 && l1 + q1 > m) return resolve_renege(s);
  if (q0 >= 2 && l1 == 0 && l2 == 0 && q0 + q1 > m) return Action::ScheduleOnBoth;
  return Action::Hold;
}

inline Action dm_decide(const SystemState& s, const ThresholdPolicy& pol) { return dm_decide(s, pol.m); }

/// Backpressure routing of one head-buffer packet. The mmWave weight uses
/// the effective rate p_a * mu_mm and the backlog already committed to the
/// mmWave line; the sub-6 weight uses the single sub-6 slot. Never reneges.
inline Action maxweight_decide(const SystemState& s, const RateParams& p) {
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  const double w_mm = is_admissible(s, Action::ScheduleOnMmWave)
                          ? static_cast<double>(s.q0 - (s.l1 + s.q1)) * p.mm_rate()
                          : kNone;
  const double w_sub6 =
      is_admissible(s, Action::ScheduleOnSub6) ? static_cast<double>(s.q0 - s.l2) * p.mu_sub6 : kNone;
  if (w_mm > 0.0 && w_mm >= w_sub6) return Action::ScheduleOnMmWave;
  if (w_sub6 > 0.0) return Action::ScheduleOnSub6;
  return Action::Hold;
}

constexpr Action no_sub6_decide(const SystemState& s) {
  return is_admissible(s, Action::ScheduleOnMmWave) ? Action::ScheduleOnMmWave : Action::Hold;
}

using DecisionRule = std::function<Action(const SystemState&)>;

struct FixpointResult {
  SystemState state;
  int actions = 0;
};

inline constexpr int kMaxEpochActions = 4;

/// Applies `decide` until it returns Hold. At most `limit` non-hold actions
/// are taken; a rule that still wants to act after kMaxEpochActions is
/// reported as ill-formed.
inline FixpointResult apply_policy_counted(const SystemState& s, const DecisionRule& decide,
                                           int limit = kMaxEpochActions) {
  FixpointResult r{s, 0};
  while (r.actions < limit) {
    const Action a = decide(r.state);
    if (a == Action::Hold) return r;
    r.state = apply_action(r.state, a);
    ++r.actions;
  }
  if (limit >= kMaxEpochActions && decide(r.state) != Action::Hold) {
    throw PolicyLoop("decision rule did not settle after " + std::to_string(kMaxEpochActions) +
                     " actions, last state " + to_string(r.state));
  }
  return r;
}

inline SystemState apply_policy_to_fixpoint(const SystemState& s, const DecisionRule& decide) {
  return apply_policy_counted(s, decide).state;
}

enum class PolicyKind { Threshold, MaxWeight, NoSub6 };

inline std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::Threshold: return "Dm";
    case PolicyKind::MaxWeight: return "MaxWeight";
    case PolicyKind::NoSub6: return "NoSub6";
  }
  return "?";
}

/// A policy bundled with its epoch semantics. MaxWeight routes at most one
/// packet per decision epoch; the other rules run to their fixed point.
struct PolicySpec {
  PolicyKind kind = PolicyKind::Threshold;
  int m = 0;

  static PolicySpec threshold(int m) { return {PolicyKind::Threshold, ThresholdPolicy(m).m}; }
  static PolicySpec maxweight() { return {PolicyKind::MaxWeight, 0}; }
  static PolicySpec no_sub6() { return {PolicyKind::NoSub6, 0}; }

  int epoch_limit() const { return kind == PolicyKind::MaxWeight ? 1 : kMaxEpochActions; }

  Action decide(const SystemState& s, const RateParams& p) const {
    switch (kind) {
      case PolicyKind::Threshold: return dm_decide(s, m);
      case PolicyKind::MaxWeight: return maxweight_decide(s, p);
      case PolicyKind::NoSub6: return no_sub6_decide(s);
    }
    return Action::Hold;
  }

  /// Post-decision state for one epoch, plus the number of actions taken.
  FixpointResult settle(const SystemState& s, const RateParams& p) const {
    return apply_policy_counted(s, [&](const SystemState& q) { return decide(q, p); }, epoch_limit());
  }
};

}  // namespace mmsched
