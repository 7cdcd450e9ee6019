#pragma once

// State space, events and actions of the integrated sub-6 GHz / mmWave
// queueing system.
//
// A packet enters the head buffer, is dispatched either to the mmWave line
// (processing server, then the mmWave queue) or to the single-slot sub-6
// server. Idle servers serve "dummy" packets, so every event is applicable in
// every state and a dummy departure is the identity map.

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mmsched/errors.hpp"

namespace mmsched {

/// (q0, l1, q1, l2): head buffer, processing-server busy flag, mmWave queue,
/// sub-6 server busy flag.
struct SystemState {
  int q0 = 0;
  int l1 = 0;
  int q1 = 0;
  int l2 = 0;

  constexpr int total() const { return q0 + l1 + q1 + l2; }
  constexpr bool valid() const {
    return q0 >= 0 && q1 >= 0 && (l1 == 0 || l1 == 1) && (l2 == 0 || l2 == 1);
  }
  friend constexpr auto operator<=>(const SystemState&, const SystemState&) = default;
};

/// (x, q1, l2) with x = q0 + l1, i.e. packets in the head buffer and the
/// processing server taken together.
struct CollapsedState {
  int x = 0;
  int q1 = 0;
  int l2 = 0;

  constexpr int total() const { return x + q1 + l2; }
  /// FastLane occupancy: head buffer + processing server + mmWave queue.
  constexpr int fastlane() const { return x + q1; }
  friend constexpr auto operator<=>(const CollapsedState&, const CollapsedState&) = default;
};

constexpr CollapsedState collapse(const SystemState& s) { return {s.q0 + s.l1, s.q1, s.l2}; }

/// Inverse of collapse under Rule 1 (a non-empty head+processing pair keeps
/// the processing server busy).
constexpr SystemState expand(const CollapsedState& c) {
  return c.x >= 1 ? SystemState{c.x - 1, 1, c.q1, c.l2} : SystemState{0, 0, c.q1, c.l2};
}

inline std::ostream& operator<<(std::ostream& os, const SystemState& s) {
  return os << '(' << s.q0 << ',' << s.l1 << ',' << s.q1 << ',' << s.l2 << ')';
}

inline std::ostream& operator<<(std::ostream& os, const CollapsedState& s) {
  return os << '(' << s.x << ',' << s.q1 << ',' << s.l2 << ')';
}

inline std::string to_string(const SystemState& s) {
  return "(" + std::to_string(s.q0) + ";" + std::to_string(s.l1) + ";" + std::to_string(s.q1) + ";" +
         std::to_string(s.l2) + ")";
}

inline std::string to_string(const CollapsedState& s) {
  return "(" + std::to_string(s.x) + ";" + std::to_string(s.q1) + ";" + std::to_string(s.l2) + ")";
}

enum class Event : std::uint8_t { Arrival, MmWaveDeparture, Sub6Departure, ProcessingCompletion };

inline constexpr std::array<Event, 4> kAllEvents = {Event::Arrival, Event::MmWaveDeparture,
                                                    Event::Sub6Departure, Event::ProcessingCompletion};

enum class Action : std::uint8_t {
  Hold,
  ScheduleOnMmWave,       // A1
  ScheduleOnSub6,         // A2
  ScheduleOnBoth,         // Ab
  RenegeFromProcessing,   // Arp
  RenegeFromMmWaveQueue,  // Armm
};

inline constexpr std::array<Action, 6> kAllActions = {
    Action::Hold,          Action::ScheduleOnMmWave,     Action::ScheduleOnSub6,
    Action::ScheduleOnBoth, Action::RenegeFromProcessing, Action::RenegeFromMmWaveQueue};

constexpr std::string_view to_string(Event e) {
  switch (e) {
    case Event::Arrival: return "Arrival";
    case Event::MmWaveDeparture: return "MmWaveDeparture";
    case Event::Sub6Departure: return "Sub6Departure";
    case Event::ProcessingCompletion: return "ProcessingCompletion";
  }
  return "?";
}

constexpr std::string_view to_string(Action a) {
  switch (a) {
    case Action::Hold: return "Hold";
    case Action::ScheduleOnMmWave: return "ScheduleOnMmWave";
    case Action::ScheduleOnSub6: return "ScheduleOnSub6";
    case Action::ScheduleOnBoth: return "ScheduleOnBoth";
    case Action::RenegeFromProcessing: return "RenegeFromProcessing";
    case Action::RenegeFromMmWaveQueue: return "RenegeFromMmWaveQueue";
  }
  return "?";
}

inline std::ostream& operator<<(std::ostream& os, Action a) { return os << to_string(a); }
inline std::ostream& operator<<(std::ostream& os, Event e) { return os << to_string(e); }

/// True for the actions that put a packet on the sub-6 server.
constexpr bool adds_to_sub6(Action a) {
  return a == Action::ScheduleOnSub6 || a == Action::ScheduleOnBoth || a == Action::RenegeFromProcessing ||
         a == Action::RenegeFromMmWaveQueue;
}

constexpr SystemState apply_event(const SystemState& s, Event e) {
  switch (e) {
    case Event::Arrival: return {s.q0 + 1, s.l1, s.q1, s.l2};
    case Event::MmWaveDeparture: return {s.q0, s.l1, s.q1 > 0 ? s.q1 - 1 : 0, s.l2};
    case Event::Sub6Departure: return {s.q0, s.l1, s.q1, 0};
    case Event::ProcessingCompletion: return {s.q0, 0, s.l1 + s.q1, s.l2};
  }
  return s;
}

constexpr bool is_admissible(const SystemState& s, Action a) {
  switch (a) {
    case Action::Hold: return true;
    case Action::ScheduleOnMmWave: return s.q0 >= 1 && s.l1 == 0;
    case Action::ScheduleOnSub6: return s.q0 >= 1 && s.l2 == 0;
    case Action::ScheduleOnBoth: return s.q0 >= 2 && s.l1 == 0 && s.l2 == 0;
    case Action::RenegeFromProcessing: return s.l1 == 1 && s.l2 == 0;
    case Action::RenegeFromMmWaveQueue: return s.q1 >= 1 && s.l2 == 0;
  }
  return false;
}

/// Admissible actions in the fixed order of kAllActions; Hold is always first.
inline std::vector<Action> admissible_actions(const SystemState& s) {
  std::vector<Action> out;
  out.reserve(kAllActions.size());
  for (Action a : kAllActions) {
    if (is_admissible(s, a)) out.push_back(a);
  }
  return out;
}

/// Action application without the admissibility check. Callers must have
/// checked is_admissible.
constexpr SystemState apply_action_unchecked(const SystemState& s, Action a) {
  switch (a) {
    case Action::Hold: return s;
    case Action::ScheduleOnMmWave: return {s.q0 - 1, 1, s.q1, s.l2};
    case Action::ScheduleOnSub6: return {s.q0 - 1, s.l1, s.q1, 1};
    case Action::ScheduleOnBoth: return {s.q0 - 2, 1, s.q1, 1};
    case Action::RenegeFromProcessing: return {s.q0, 0, s.q1, 1};
    case Action::RenegeFromMmWaveQueue: return {s.q0, s.l1, s.q1 - 1, 1};
  }
  return s;
}

inline SystemState apply_action(const SystemState& s, Action a) {
  if (!is_admissible(s, a)) {
    throw InadmissibleAction("action " + std::string(to_string(a)) + " is not admissible in state " +
                             to_string(s));
  }
  return apply_action_unchecked(s, a);
}

/// Composite reneging action Ar. When both variants are admissible the
/// processing-server packet is moved (Rule 3). Returns Hold when neither is
/// admissible.
constexpr Action resolve_renege(const SystemState& s) {
  if (is_admissible(s, Action::RenegeFromProcessing)) return Action::RenegeFromProcessing;
  if (is_admissible(s, Action::RenegeFromMmWaveQueue)) return Action::RenegeFromMmWaveQueue;
  return Action::Hold;
}

/// Event rates plus the discount factor. Raw rates are events per unit time;
/// after uniformize() the four event rates (with p_a folded into the mmWave
/// rate) sum to one and are probabilities per slot.
struct RateParams {
  double lambda = 0.0;
  double mu_p = 0.0;
  double mu_mm = 0.0;
  double mu_sub6 = 0.0;
  double p_a = 1.0;
  double beta = 0.0;

  constexpr double p_na() const { return 1.0 - p_a; }
  /// Effective mmWave departure rate p_a * mu_mm.
  constexpr double mm_rate() const { return p_a * mu_mm; }
  constexpr double total_rate() const { return lambda + mu_p + mm_rate() + mu_sub6; }

  friend constexpr bool operator==(const RateParams&, const RateParams&) = default;
};

inline constexpr double kUniformTolerance = 1e-12;

inline bool is_uniformized(const RateParams& p) {
  return std::abs(p.total_rate() - 1.0) <= kUniformTolerance;
}

inline void require_uniformized(const RateParams& p) {
  if (!is_uniformized(p)) {
    throw ParamsNotUniformized("event rates sum to " + std::to_string(p.total_rate()) + ", expected 1");
  }
}

struct Uniformized {
  RateParams params;
  /// Total event rate of the raw parameters; one uniformized slot lasts
  /// 1/scale time units on average.
  double scale = 1.0;
};

/// Divides every rate by Lambda = lambda + mu_p + p_a mu_mm + mu_sub6.
/// A zero arrival rate is accepted (empty-load runs); service rates must be
/// strictly positive.
inline Uniformized uniformize(const RateParams& raw) {
  if (!(raw.mu_p > 0.0) || !(raw.mu_mm > 0.0) || !(raw.mu_sub6 > 0.0) || !(raw.lambda >= 0.0)) {
    throw NonPositiveRate("service rates must be > 0 and the arrival rate >= 0");
  }
  if (!(raw.p_a >= 0.0 && raw.p_a <= 1.0)) throw NonPositiveRate("p_a must lie in [0, 1]");
  if (is_uniformized(raw)) return {raw, 1.0};
  const double scale = raw.total_rate();
  RateParams out = raw;
  out.lambda = raw.lambda / scale;
  out.mu_p = raw.mu_p / scale;
  out.mu_mm = raw.mu_mm / scale;
  out.mu_sub6 = raw.mu_sub6 / scale;
  return {out, scale};
}

/// The expected trip through an empty mmWave line beats one sub-6 service:
/// 1/(p_a mu_mm) + 1/mu_p < 1/mu_sub6. Scale invariant.
inline bool check_fastlane_assumption(const RateParams& p) {
  if (p.mm_rate() <= 0.0 || p.mu_p <= 0.0 || p.mu_sub6 <= 0.0) return false;
  return 1.0 / p.mm_rate() + 1.0 / p.mu_p < 1.0 / p.mu_sub6;
}

struct StabilityRegion {
  bool stable_with_sub6 = false;
  bool stable_without_sub6 = false;
  double border_lambda = 0.0;
};

/// Capacity of the integrated system is mu_sub6 + p_a mu_mm; without the
/// sub-6 interface it is p_a mu_mm. The processing server is assumed faster
/// than the effective mmWave rate, as in every scenario considered here.
inline StabilityRegion stability_region(const RateParams& p) {
  const double border = p.mu_sub6 + p.mm_rate();
  return {p.lambda < border, p.lambda < p.mm_rate(), border};
}

}  // namespace mmsched
