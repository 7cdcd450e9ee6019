#pragma once

// Slot-by-slot simulation of the uniformized chain.
//
// Every slot draws one event with probabilities (lambda, mu_p, p_a mu_mm,
// mu_sub6) / Lambda, applies it (dummy departures are no-ops) and lets the
// policy act on the post-event state. Slot durations are i.i.d. exponential
// with mean 1/Lambda whatever the state, so the time average of the occupancy
// equals its average over slots.
//
// Packets carry their arrival slot, which gives a direct sojourn-time
// estimate next to the Little's-law delay.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "mmsched/core_model.hpp"
#include "mmsched/errors.hpp"
#include "mmsched/policies.hpp"

namespace mmsched {

struct SimConfig {
  RateParams params;  // raw rates; beta is ignored
  PolicySpec policy;
  std::uint64_t horizon_events = 100'000;
  /// Slots discarded before measuring; defaults to 10% of the horizon.
  std::optional<std::uint64_t> warmup_events;
  std::uint64_t seed = 1;
  int replications = 1;
  /// Maximum number of packets in the system; arrivals beyond it are
  /// dropped. 0 means unbounded.
  int capacity = 0;
  /// Worker threads for replications (0 = hardware concurrency).
  int jobs = 1;

  std::uint64_t warmup() const { return warmup_events.value_or(horizon_events / 10); }

  void validate() const {
    if (horizon_events == 0) throw InvalidConfig("horizon must be positive");
    if (warmup() >= horizon_events) throw InvalidConfig("warmup must be shorter than the horizon");
    if (replications < 1) throw InvalidConfig("at least one replication is required");
    if (capacity < 0) throw InvalidConfig("capacity must be nonnegative");
    if (policy.kind == PolicyKind::Threshold && policy.m < 0) throw InvalidConfig("threshold must be nonnegative");
  }
};

struct ReplicationStats {
  std::uint64_t seed = 0;
  double avg_occupancy = 0.0;
  /// Little's-law delay: occupancy over the accepted arrival rate.
  double avg_delay = 0.0;
  /// Mean measured time in system of packets departing in the window.
  double sojourn_delay = 0.0;
  double throughput = 0.0;
  double arrival_rate = 0.0;
  std::uint64_t arrivals = 0;  // accepted, whole run
  std::uint64_t departures = 0;
  std::uint64_t blocked = 0;
  std::uint64_t final_occupancy = 0;
  std::uint64_t window_departures = 0;
  std::array<std::uint64_t, 4> event_counts{};  // kAllEvents order
  int max_epoch_actions = 0;

  bool conserved() const { return arrivals == departures + final_occupancy; }
};

struct Estimate {
  double mean = 0.0;
  /// 95% Student-t half-width across replications; NaN with one replication.
  double ci = std::numeric_limits<double>::quiet_NaN();
};

struct SimStats {
  Estimate occupancy;
  Estimate delay;
  Estimate sojourn;
  Estimate throughput;
  std::uint64_t events_simulated = 0;
  /// Arrival rate at or above the policy's service capacity.
  bool overloaded = false;
  std::vector<ReplicationStats> replications;

  bool all_conserved() const {
    return std::all_of(replications.begin(), replications.end(), [](const auto& r) { return r.conserved(); });
  }
};

inline Estimate estimate(const std::vector<double>& xs) {
  Estimate e;
  if (xs.empty()) return e;
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  e.mean = sum / n;
  if (xs.size() < 2) return e;
  double ss = 0.0;
  for (double x : xs) ss += (x - e.mean) * (x - e.mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  e.ci = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(n);
  return e;
}

/// Arrival rate the policy can sustain: p_a mu_mm without sub-6, otherwise
/// mu_sub6 + p_a mu_mm.
inline double policy_capacity(const RateParams& raw, const PolicySpec& policy) {
  return policy.kind == PolicyKind::NoSub6 ? raw.mm_rate() : raw.mm_rate() + raw.mu_sub6;
}

namespace detail {

/// Packet-level state. Each entry is the arrival slot of a packet.
class PacketSystem {
 public:
  SystemState state() const {
    return {static_cast<int>(head_.size()), processing_ ? 1 : 0, static_cast<int>(mmwave_.size()), sub6_ ? 1 : 0};
  }
  std::uint64_t occupancy() const {
    return head_.size() + mmwave_.size() + (processing_ ? 1 : 0) + (sub6_ ? 1 : 0);
  }

  void arrive(std::uint64_t slot) { head_.push_back(slot); }

  /// Returns the arrival slot of a departing real packet.
  std::optional<std::uint64_t> mmwave_departure() { return pop_front(mmwave_); }
  std::optional<std::uint64_t> sub6_departure() { return std::exchange(sub6_, std::nullopt); }

  void processing_completion() {
    if (processing_) mmwave_.push_back(*std::exchange(processing_, std::nullopt));
  }

  void act(Action a) {
    switch (a) {
      case Action::Hold: return;
      case Action::ScheduleOnMmWave: processing_ = *pop_front(head_); return;
      case Action::ScheduleOnSub6: sub6_ = *pop_front(head_); return;
      case Action::ScheduleOnBoth:
        processing_ = *pop_front(head_);
        sub6_ = *pop_front(head_);
        return;
      case Action::RenegeFromProcessing: sub6_ = *std::exchange(processing_, std::nullopt); return;
      case Action::RenegeFromMmWaveQueue:
        // the most recent packet in the mmWave queue is the one moved
        sub6_ = mmwave_.back();
        mmwave_.pop_back();
        return;
    }
  }

 private:
  static std::optional<std::uint64_t> pop_front(std::deque<std::uint64_t>& q) {
    if (q.empty()) return std::nullopt;
    const std::uint64_t v = q.front();
    q.pop_front();
    return v;
  }

  std::deque<std::uint64_t> head_;
  std::optional<std::uint64_t> processing_;
  std::deque<std::uint64_t> mmwave_;
  std::optional<std::uint64_t> sub6_;
};

inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

/// One replication with the given seed. Raw rates are uniformized here.
inline ReplicationStats simulate_replication(const SimConfig& cfg, std::uint64_t seed) {
  const Uniformized u = uniformize(cfg.params);
  const RateParams& p = u.params;
  const double c_arrival = p.lambda;
  const double c_processing = c_arrival + p.mu_p;
  const double c_mmwave = c_processing + p.mm_rate();

  std::mt19937_64 rng(seed);
  detail::PacketSystem sys;
  ReplicationStats r;
  r.seed = seed;
  const std::uint64_t warmup = cfg.warmup();
  double occupancy_sum = 0.0;
  double sojourn_sum = 0.0;
  std::uint64_t window_arrivals = 0;

  for (std::uint64_t slot = 0; slot < cfg.horizon_events; ++slot) {
    const bool measuring = slot >= warmup;
    const double draw = detail::unit_uniform(rng);
    std::optional<std::uint64_t> departed;
    if (draw < c_arrival) {
      ++r.event_counts[0];
      if (cfg.capacity > 0 && sys.occupancy() >= static_cast<std::uint64_t>(cfg.capacity)) {
        ++r.blocked;
      } else {
        sys.arrive(slot);
        ++r.arrivals;
        if (measuring) ++window_arrivals;
      }
    } else if (draw < c_processing) {
      ++r.event_counts[3];
      sys.processing_completion();
    } else if (draw < c_mmwave) {
      ++r.event_counts[1];
      departed = sys.mmwave_departure();
    } else {
      ++r.event_counts[2];
      departed = sys.sub6_departure();
    }
    if (departed) {
      ++r.departures;
      if (measuring) {
        ++r.window_departures;
        sojourn_sum += static_cast<double>(slot - *departed);
      }
    }

    SystemState s = sys.state();
    int taken = 0;
    while (taken < cfg.policy.epoch_limit()) {
      const Action a = cfg.policy.decide(s, p);
      if (a == Action::Hold) break;
      if (!is_admissible(s, a)) {
        throw InadmissibleAction("policy chose " + std::string(to_string(a)) + " in " + to_string(s));
      }
      sys.act(a);
      s = apply_action_unchecked(s, a);
      ++taken;
    }
    if (taken == kMaxEpochActions && cfg.policy.decide(s, p) != Action::Hold) {
      throw PolicyLoop("policy did not settle in state " + to_string(s));
    }
    r.max_epoch_actions = std::max(r.max_epoch_actions, taken);
    if (measuring) occupancy_sum += static_cast<double>(sys.occupancy());
  }

  const double window = static_cast<double>(cfg.horizon_events - warmup);
  const double slot_time = 1.0 / u.scale;
  r.final_occupancy = sys.occupancy();
  r.avg_occupancy = occupancy_sum / window;
  r.arrival_rate = static_cast<double>(window_arrivals) / (window * slot_time);
  r.avg_delay = r.arrival_rate > 0.0 ? r.avg_occupancy / r.arrival_rate : 0.0;
  r.throughput = static_cast<double>(r.window_departures) / (window * slot_time);
  // a packet arriving in slot a and leaving in slot d stays for the d - a
  // inter-event intervals that follow slots a .. d-1
  r.sojourn_delay = r.window_departures > 0 ? sojourn_sum / static_cast<double>(r.window_departures) * slot_time : 0.0;
  return r;
}

inline SimStats aggregate(std::vector<ReplicationStats> reps, const SimConfig& cfg) {
  SimStats out;
  std::vector<double> occ, del, soj, tput;
  for (const auto& r : reps) {
    occ.push_back(r.avg_occupancy);
    del.push_back(r.avg_delay);
    soj.push_back(r.sojourn_delay);
    tput.push_back(r.throughput);
  }
  out.occupancy = estimate(occ);
  out.delay = estimate(del);
  out.sojourn = estimate(soj);
  out.throughput = estimate(tput);
  out.events_simulated = cfg.horizon_events * reps.size();
  out.overloaded = cfg.params.lambda >= policy_capacity(cfg.params, cfg.policy);
  out.replications = std::move(reps);
  return out;
}

/// Runs cfg.replications replications with seeds seed, seed+1, ...
inline SimStats simulate(const SimConfig& cfg) {
  cfg.validate();
  uniformize(cfg.params);  // surfaces rate errors before any thread starts
  const auto n = static_cast<std::size_t>(cfg.replications);
  std::vector<ReplicationStats> reps(n);
  unsigned workers = cfg.jobs > 0 ? static_cast<unsigned>(cfg.jobs) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) reps[i] = simulate_replication(cfg, cfg.seed + i);
    return aggregate(std::move(reps), cfg);
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) reps[i] = simulate_replication(cfg, cfg.seed + i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return aggregate(std::move(reps), cfg);
}

struct SweepRow {
  int m = 0;
  SimStats stats;
};

/// One batch per threshold, all with the same seeds.
inline std::vector<SweepRow> sweep_threshold(const RateParams& raw, const std::vector<int>& m_values,
                                             const SimConfig& base) {
  if (m_values.empty()) throw InvalidConfig("threshold sweep needs at least one m");
  std::vector<SweepRow> rows;
  for (int m : m_values) {
    SimConfig cfg = base;
    cfg.params = raw;
    cfg.policy = PolicySpec::threshold(m);
    rows.push_back({m, simulate(cfg)});
  }
  return rows;
}

/// Row with the smallest mean delay; the first one wins ties.
inline const SweepRow& sweep_argmin(const std::vector<SweepRow>& rows) {
  if (rows.empty()) throw InvalidConfig("empty sweep");
  return *std::min_element(rows.begin(), rows.end(),
                           [](const SweepRow& a, const SweepRow& b) { return a.stats.delay.mean < b.stats.delay.mean; });
}

struct Improvement {
  double w_hat = 0.0;
  double delay_without = 0.0;
  double delay_with = 0.0;
  /// The mmWave-only arm is unstable; its delay is a truncated-horizon value.
  bool censored = false;
  SimStats without_sub6;
  SimStats with_sub6;
};

/// (W(no sub-6) - W(D_m)) / W(no sub-6), both arms on the same seeds.
inline Improvement relative_improvement(const RateParams& raw, int m, const SimConfig& base) {
  SimConfig no = base;
  no.params = raw;
  no.policy = PolicySpec::no_sub6();
  SimConfig with = base;
  with.params = raw;
  with.policy = PolicySpec::threshold(m);
  Improvement out;
  out.without_sub6 = simulate(no);
  out.with_sub6 = simulate(with);
  out.delay_without = out.without_sub6.delay.mean;
  out.delay_with = out.with_sub6.delay.mean;
  out.censored = raw.lambda >= raw.mm_rate();
  out.w_hat = out.delay_without > 0.0 ? (out.delay_without - out.delay_with) / out.delay_without : 0.0;
  return out;
}

struct MaxWeightRow {
  double lambda = 0.0;
  int m = 0;
  SimStats dm;
  SimStats maxweight;
};

inline std::vector<MaxWeightRow> compare_maxweight(const std::vector<RateParams>& params_list,
                                                   const std::vector<int>& m_per_lambda, const SimConfig& base) {
  if (params_list.size() != m_per_lambda.size()) {
    throw InvalidConfig("one threshold per arrival rate is required");
  }
  std::vector<MaxWeightRow> rows;
  for (std::size_t i = 0; i < params_list.size(); ++i) {
    SimConfig dm = base;
    dm.params = params_list[i];
    dm.policy = PolicySpec::threshold(m_per_lambda[i]);
    SimConfig mw = dm;
    mw.policy = PolicySpec::maxweight();
    rows.push_back({params_list[i].lambda, m_per_lambda[i], simulate(dm), simulate(mw)});
  }
  return rows;
}

struct RunRecord {
  RateParams params;
  PolicySpec policy;
  SimStats stats;
  std::uint64_t seed = 0;
  std::uint64_t horizon = 0;
};

inline void write_runs_header(std::ostream& os) {
  os << "lambda,mu_p,mu_mm,mu_sub6,p_a,policy,m,avg_occupancy,avg_delay,throughput,ci_delay,ci_tput,seed,horizon\n";
}

inline void write_run_row(std::ostream& os, const RunRecord& r) {
  os << r.params.lambda << ',' << r.params.mu_p << ',' << r.params.mu_mm << ',' << r.params.mu_sub6 << ','
     << r.params.p_a << ',' << to_string(r.policy.kind) << ',';
  if (r.policy.kind == PolicyKind::Threshold) os << r.policy.m;
  os << ',' << r.stats.occupancy.mean << ',' << r.stats.delay.mean << ',' << r.stats.throughput.mean << ','
     << r.stats.delay.ci << ',' << r.stats.throughput.ci << ',' << r.seed << ',' << r.horizon << '\n';
}

}  // namespace mmsched
