#pragma once

// Bellman operator on the full 4-D state space (q0, l1, q1, l2).
//
// After each event a single action is chosen from {Ah, A1, A2, Ab, Ar}, where
// the composite Ar resolves to the processing-server renege whenever it is
// admissible. Truncation mirrors the collapsed solver: a state is kept when
// q0 + l1 <= x_max and q1 <= q1_max; arrivals with q0 + l1 = x_max and
// processing completions with q1 = q1_max are self-loops.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "mmsched/core_model.hpp"
#include "mmsched/errors.hpp"
#include "mmsched/mdp_solver.hpp"

namespace mmsched {

class ValueFunction4D {
 public:
  ValueFunction4D() = default;
  explicit ValueFunction4D(TruncationBox box)
      : box_(box), values_(static_cast<std::size_t>(box.x_max + 1) * 2 * static_cast<std::size_t>(box.q1_max + 1) * 2,
                           0.0) {}

  /// v(q) = q . e on every state of the box.
  static ValueFunction4D total_count(TruncationBox box) {
    ValueFunction4D v(box);
    v.for_each_state([&](const SystemState& q) { v(q) = static_cast<double>(q.total()); });
    return v;
  }

  const TruncationBox& box() const { return box_; }

  bool contains(const SystemState& q) const {
    return q.valid() && q.q0 + q.l1 <= box_.x_max && q.q1 <= box_.q1_max;
  }

  double& operator()(const SystemState& q) { return values_[index(q)]; }
  double operator()(const SystemState& q) const { return values_[index(q)]; }

  double at(const SystemState& q) const {
    if (!contains(q)) throw OutOfBox("state " + to_string(q) + " is outside the 4-D truncation box");
    return (*this)(q);
  }

  template <typename Fn>
  void for_each_state(Fn&& fn) const {
    for (int q0 = 0; q0 <= box_.x_max; ++q0)
      for (int l1 = 0; l1 <= 1; ++l1) {
        if (q0 + l1 > box_.x_max) continue;
        for (int q1 = 0; q1 <= box_.q1_max; ++q1)
          for (int l2 = 0; l2 <= 1; ++l2) fn(SystemState{q0, l1, q1, l2});
      }
  }

  double sup_distance(const ValueFunction4D& other) const {
    double d = 0.0;
    for_each_state([&](const SystemState& q) { d = std::max(d, std::abs((*this)(q) - other(q))); });
    return d;
  }

  std::size_t raw_size() const { return values_.size(); }
  std::size_t raw_index(const SystemState& q) const { return index(q); }

 private:
  std::size_t index(const SystemState& q) const {
    return ((static_cast<std::size_t>(q.q0) * 2 + static_cast<std::size_t>(q.l1)) *
                static_cast<std::size_t>(box_.q1_max + 1) +
            static_cast<std::size_t>(q.q1)) *
               2 +
           static_cast<std::size_t>(q.l2);
  }

  TruncationBox box_{};
  std::vector<double> values_;
};

/// Candidate controls after an event, in tie-break order: the not-adding
/// actions first, then A2, Ab and the composite renege.
inline std::array<Action, 5> control_candidates(const SystemState& s) {
  return {Action::ScheduleOnMmWave, Action::Hold, Action::ScheduleOnSub6, Action::ScheduleOnBoth,
          resolve_renege(s)};
}

/// A control is usable in the truncated chain when it is admissible and does
/// not leave the processing server idle with packets in the head buffer.
/// Idling is never better in the unbounded model, but with arrivals blocked
/// at x_max it would let the controller park the head buffer at the face and
/// keep arrivals out indefinitely, a gain that exists only in the truncation.
inline bool usable_control(const SystemState& s, Action a) {
  if (!is_admissible(s, a)) return false;
  const SystemState t = apply_action_unchecked(s, a);
  return !(t.q0 >= 1 && t.l1 == 0);
}

/// Post-event state inside the truncation box.
inline SystemState truncated_event(const SystemState& q, Event e, const TruncationBox& box) {
  if (e == Event::Arrival && q.q0 + q.l1 >= box.x_max) return q;
  if (e == Event::ProcessingCompletion && q.l1 == 1 && q.q1 >= box.q1_max) return q;
  return apply_event(q, e);
}

/// Minimizing control at s for value function v, with the tie-break order of
/// control_candidates.
inline Action best_control(const ValueFunction4D& v, const SystemState& s) {
  Action best = Action::Hold;
  double best_value = std::numeric_limits<double>::infinity();
  for (Action a : control_candidates(s)) {
    if (!usable_control(s, a)) continue;
    const double value = v(apply_action_unchecked(s, a));
    if (value < best_value) {
      best_value = value;
      best = a;
    }
  }
  return best;
}

inline double min_over_controls(const ValueFunction4D& v, const SystemState& s) {
  double best = std::numeric_limits<double>::infinity();
  for (Action a : control_candidates(s)) {
    if (usable_control(s, a)) best = std::min(best, v(apply_action_unchecked(s, a)));
  }
  return best;
}

namespace detail {

/// Precomputed successor structure of the truncated 4-D chain. For every
/// state it stores the post-event state of each event and, for every state,
/// the states reachable by one admissible control.
class Chain4D {
 public:
  explicit Chain4D(const TruncationBox& box) : box_(box), shape_(box) {
    shape_.for_each_state([&](const SystemState& q) { states_.push_back(q); });
    const std::size_t n = states_.size();
    flat_.assign(ValueFunction4D(box).raw_size(), kNone);
    for (std::size_t i = 0; i < n; ++i) flat_[shape_.raw_index(states_[i])] = i;
    controls_.assign(n * kControls, kNone);
    events_.assign(n * 4, kNone);
    for (std::size_t i = 0; i < n; ++i) {
      const SystemState& q = states_[i];
      const auto cands = control_candidates(q);
      for (std::size_t c = 0; c < kControls; ++c) {
        if (usable_control(q, cands[c])) controls_[i * kControls + c] = lookup(apply_action_unchecked(q, cands[c]));
      }
      events_[i * 4 + 0] = lookup(truncated_event(q, Event::Arrival, box));
      events_[i * 4 + 1] = lookup(truncated_event(q, Event::ProcessingCompletion, box));
      events_[i * 4 + 2] = lookup(truncated_event(q, Event::MmWaveDeparture, box));
      events_[i * 4 + 3] = lookup(truncated_event(q, Event::Sub6Departure, box));
    }
  }

  std::size_t size() const { return states_.size(); }
  const std::vector<SystemState>& states() const { return states_; }

  /// out = L(in) on the dense state ordering; `best` is scratch space.
  void apply(const RateParams& p, const std::vector<double>& in, std::vector<double>& best,
             std::vector<double>& out) const {
    const std::size_t n = states_.size();
    best.resize(n);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double b = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < kControls; ++c) {
        const std::size_t j = controls_[i * kControls + c];
        if (j != kNone) b = std::min(b, in[j]);
      }
      best[i] = b;
    }
    const double mm = p.mm_rate();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t* e = &events_[i * 4];
      out[i] = static_cast<double>(states_[i].total()) +
               p.beta * (p.lambda * best[e[0]] + mm * best[e[2]] + p.mu_sub6 * best[e[3]] + p.mu_p * best[e[1]]);
    }
  }

  std::vector<double> gather(const ValueFunction4D& v) const {
    std::vector<double> out(states_.size());
    for (std::size_t i = 0; i < states_.size(); ++i) out[i] = v(states_[i]);
    return out;
  }

  ValueFunction4D scatter(const std::vector<double>& dense) const {
    ValueFunction4D v(box_);
    for (std::size_t i = 0; i < states_.size(); ++i) v(states_[i]) = dense[i];
    return v;
  }

 private:
  static constexpr std::size_t kControls = 5;
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::size_t lookup(const SystemState& q) const { return flat_[shape_.raw_index(q)]; }

  TruncationBox box_;
  ValueFunction4D shape_;
  std::vector<SystemState> states_;
  std::vector<std::size_t> flat_;
  std::vector<std::size_t> controls_;
  std::vector<std::size_t> events_;
};

}  // namespace detail

/// (Lv)(q) = q.e + beta * sum over events of rate * min_u v(u(event(q))).
/// The minimization over the control 4-tuple decomposes per event.
inline ValueFunction4D bellman_operator_4d(const ValueFunction4D& v, const RateParams& p) {
  require_uniformized(p);
  const detail::Chain4D chain(v.box());
  std::vector<double> best, out;
  chain.apply(p, chain.gather(v), best, out);
  return chain.scatter(out);
}

struct Solution4D {
  ValueFunction4D values;
  std::size_t iterations = 0;
  double last_step = 0.0;
};

/// Iterates the 4-D operator from v(q) = q.e until successive iterates are
/// closer than tol in sup norm.
inline Solution4D solve_4d(const RateParams& p, const TruncationBox& box, const SolveOptions& opts = {}) {
  require_uniformized(p);
  box.validate();
  if (!(p.beta >= 0.0 && p.beta < 1.0)) throw InvalidConfig("discount factor must lie in [0, 1)");
  const detail::Chain4D chain(box);
  std::vector<double> current = chain.gather(ValueFunction4D::total_count(box));
  std::vector<double> next, best;
  double diff = std::numeric_limits<double>::infinity();
  std::size_t n = 0;
  while (n < opts.max_iter) {
    chain.apply(p, current, best, next);
    ++n;
    diff = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) diff = std::max(diff, std::abs(next[i] - current[i]));
    std::swap(current, next);
    if (diff < opts.tol) break;
  }
  if (!(diff < opts.tol)) {
    throw NoConvergence("4-D value iteration stopped after " + std::to_string(n) + " iterations with step " +
                        std::to_string(diff));
  }
  return {chain.scatter(current), n, diff};
}

}  // namespace mmsched
