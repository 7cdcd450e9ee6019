// Acceptance run for the paper scenario (mu_p = mu_mm = 100, mu_sub6 = 1,
// p_a = 0.6). Prints one PASS/FAIL line per criterion followed by indented
// detail lines; exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mmsched/bellman4d.hpp"
#include "mmsched/mdp_solver.hpp"
#include "mmsched/simulator.hpp"
#include "mmsched/verifier.hpp"

using namespace mmsched;

namespace {

constexpr double kMuP = 100.0;
constexpr double kMuMm = 100.0;
constexpr double kMuSub6 = 1.0;
constexpr double kPa = 0.6;

// Simulation budget. One core runs roughly 10^7 slots in a few seconds.
constexpr std::uint64_t kSweepHorizon = 4'000'000;
constexpr int kSweepReplications = 5;
constexpr std::uint64_t kBlockageHorizon = 4'000'000;
constexpr int kBlockageReplications = 4;
constexpr std::uint64_t kCompareHorizon = 4'000'000;
constexpr int kCompareReplications = 5;

RateParams raw_rates(double lambda, double p_a = kPa) { return {lambda, kMuP, kMuMm, kMuSub6, p_a, 0.0}; }

RateParams discounted(double lambda, double beta) {
  RateParams p = uniformize(raw_rates(lambda)).params;
  p.beta = beta;
  return p;
}

SimConfig sim_base(std::uint64_t horizon, int reps, std::uint64_t seed) {
  SimConfig c;
  c.horizon_events = horizon;
  c.replications = reps;
  c.seed = seed;
  return c;
}

class Report {
 public:
  void criterion(const std::string& name, bool pass, const std::vector<std::string>& details) {
    std::cout << (pass ? "PASS " : "FAIL ") << name << '\n';
    for (const auto& d : details) std::cout << "    " << d << '\n';
    std::cout.flush();
    all_ok_ = all_ok_ && pass;
  }
  bool all_ok() const { return all_ok_; }

 private:
  bool all_ok_ = true;
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<int> range(int lo, int hi) {
  std::vector<int> out;
  for (int m = lo; m <= hi; ++m) out.push_back(m);
  return out;
}

// Cache of MDP thresholds by arrival rate (box 40, default discount ladder).
std::map<double, AverageDelayThreshold> g_mdp;

const AverageDelayThreshold& mdp_threshold(double lambda) {
  auto it = g_mdp.find(lambda);
  if (it == g_mdp.end()) {
    it = g_mdp.emplace(lambda, average_delay_threshold(discounted(lambda, 0.0), {40, 40})).first;
  }
  return it->second;
}

std::string trajectory_text(const AverageDelayThreshold& r) {
  std::string out;
  for (const auto& b : r.trajectory) {
    out += fmt("beta=%g m=%s interior=%s; ", b.beta, b.threshold.describe().c_str(), b.interior.describe().c_str());
  }
  return out;
}

// Simulated sweeps by arrival rate, shared between criteria.
std::map<double, std::vector<SweepRow>> g_sweeps;

const std::vector<SweepRow>& sim_sweep(double lambda, const std::vector<int>& ms) {
  auto it = g_sweeps.find(lambda);
  if (it == g_sweeps.end()) {
    it = g_sweeps.emplace(lambda, sweep_threshold(raw_rates(lambda), ms, sim_base(kSweepHorizon, kSweepReplications, 1)))
             .first;
  }
  return it->second;
}

void threshold_reproduction(Report& rep) {
  std::vector<std::string> d;
  bool pass = false;
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const AverageDelayThreshold& mdp = mdp_threshold(45.0);
    d.push_back(fmt("MDP threshold m=%s (%.1f s); %s", mdp.threshold.describe().c_str(), seconds_since(t0),
                    trajectory_text(mdp).c_str()));
    const auto t1 = std::chrono::steady_clock::now();
    const auto& rows = sim_sweep(45.0, range(8, 28));
    const SweepRow& best = sweep_argmin(rows);
    std::string curve;
    for (const auto& r : rows) curve += fmt("%d:%.5f ", r.m, r.stats.delay.mean);
    d.push_back(fmt("simulated argmin m=%d delay=%.5f +- %.5f (%.1f s, %llu slots x %d reps per m)", best.m,
                    best.stats.delay.mean, best.stats.delay.ci, seconds_since(t1),
                    static_cast<unsigned long long>(kSweepHorizon), kSweepReplications));
    d.push_back("delay curve " + curve);
    const bool mdp_in = mdp.threshold.finite() && mdp.threshold.m >= 16 && mdp.threshold.m <= 20;
    const bool sim_in = best.m >= 16 && best.m <= 20;
    const bool agree = mdp.threshold.finite() && std::abs(mdp.threshold.m - best.m) <= 2;
    d.push_back(fmt("MDP in [16,20]: %s; simulated in [16,20]: %s; agree within 2: %s", mdp_in ? "yes" : "no",
                    sim_in ? "yes" : "no", agree ? "yes" : "no"));
    pass = mdp_in && sim_in && agree;
  } catch (const std::exception& e) {
    d.push_back(std::string("error: ") + e.what());
  }
  rep.criterion("threshold reproduction at lambda=45", pass, d);
}

void threshold_monotonicity(Report& rep) {
  std::vector<std::string> d;
  bool pass = false;
  try {
    std::vector<int> mdp_m, sim_m;
    for (double lambda : {45.0, 50.0, 55.0}) {
      const AverageDelayThreshold& r = mdp_threshold(lambda);
      const SweepRow& best = sweep_argmin(sim_sweep(lambda, range(4, 28)));
      mdp_m.push_back(r.threshold.finite() ? r.threshold.m : 1 << 20);
      sim_m.push_back(best.m);
      d.push_back(fmt("lambda=%g MDP m=%s simulated argmin m=%d", lambda, r.threshold.describe().c_str(), best.m));
    }
    const bool mdp_ok = std::is_sorted(mdp_m.rbegin(), mdp_m.rend());
    const bool sim_ok = std::is_sorted(sim_m.rbegin(), sim_m.rend());
    d.push_back(fmt("MDP non-increasing: %s; simulated non-increasing: %s", mdp_ok ? "yes" : "no",
                    sim_ok ? "yes" : "no"));
    pass = mdp_ok && sim_ok;
  } catch (const std::exception& e) {
    d.push_back(std::string("error: ") + e.what());
  }
  rep.criterion("threshold non-increasing in lambda over {45,50,55}", pass, d);
}

Improvement best_improvement(double lambda, double p_na, int& best_m) {
  const RateParams raw = raw_rates(lambda, 1.0 - p_na);
  std::optional<Improvement> best;
  for (int m : {0, 1, 2, 5, 10, 18}) {
    Improvement imp = relative_improvement(raw, m, sim_base(kBlockageHorizon, kBlockageReplications, 1));
    if (!best || imp.delay_with < best->delay_with) {
      best = std::move(imp);
      best_m = m;
    }
  }
  return *best;
}

void blockage_improvement(Report& rep) {
  std::vector<std::string> d;
  bool pass = false;
  try {
    // p_a mu_mm must stay above lambda = 60 for the mmWave-only arm to have a
    // steady state: p_na < 0.4
    double max_w = -1.0;
    for (double p_na : {0.0, 0.2, 0.3, 0.35, 0.38, 0.39, 0.395}) {
      int m = -1;
      const Improvement imp = best_improvement(60.0, p_na, m);
      d.push_back(fmt("lambda=60 p_na=%.3f W_hat=%.4f (m=%d, W without=%.4f with=%.4f)", p_na, imp.w_hat, m,
                      imp.delay_without, imp.delay_with));
      max_w = std::max(max_w, imp.w_hat);
    }
    int m30 = -1;
    const Improvement light = best_improvement(30.0, 0.0, m30);
    d.push_back(fmt("lambda=30 p_na=0 W_hat=%.4f (m=%d)", light.w_hat, m30));
    d.push_back(fmt("max W_hat at lambda=60: %.4f (need >= 0.6); lambda=30: %.4f (need < 0.05)", max_w, light.w_hat));
    pass = max_w >= 0.6 && light.w_hat < 0.05;
  } catch (const std::exception& e) {
    d.push_back(std::string("error: ") + e.what());
  }
  rep.criterion("relative improvement under blockage", pass, d);
}

void maxweight_comparison(Report& rep) {
  std::vector<std::string> d;
  bool pass = true;
  try {
    for (double lambda : {30.0, 45.0}) {
      const AverageDelayThreshold& r = mdp_threshold(lambda);
      // an infinite threshold means D_m never adds within the box; any m
      // beyond the box side behaves the same in the simulator
      const int m = r.threshold.finite() ? r.threshold.m : 1 << 20;
      const auto rows =
          compare_maxweight({raw_rates(lambda)}, {m}, sim_base(kCompareHorizon, kCompareReplications, 1));
      const auto& row = rows.front();
      const double ratio = row.dm.delay.mean / row.maxweight.delay.mean;
      const double tput_gap = std::abs(row.dm.throughput.mean - row.maxweight.throughput.mean) /
                              row.maxweight.throughput.mean;
      const bool ok = ratio <= 0.9 && tput_gap <= 0.02;
      d.push_back(fmt("lambda=%g m=%s delay Dm=%.5f+-%.5f MW=%.5f+-%.5f ratio=%.3f (need <= 0.9); "
                      "throughput Dm=%.3f MW=%.3f gap=%.4f (need <= 0.02)",
                      lambda, r.threshold.describe().c_str(), row.dm.delay.mean, row.dm.delay.ci,
                      row.maxweight.delay.mean, row.maxweight.delay.ci, ratio, row.dm.throughput.mean,
                      row.maxweight.throughput.mean, tput_gap));
      pass = pass && ok;
    }
  } catch (const std::exception& e) {
    d.push_back(std::string("error: ") + e.what());
    pass = false;
  }
  rep.criterion("D_m* against MaxWeight at lambda in {30,45}", pass, d);
}

struct SuiteResult {
  std::size_t value_violations = 0;
  std::size_t iterates = 0;
  IterationThresholdCheck thresholds;
  std::size_t thm1 = 0;
  std::size_t rule3 = 0;
  ThresholdResult final_threshold;
  std::string first_value_violation;
  std::string first_lemma2;
};

SuiteResult property_suite(const TruncationBox& box, const RateParams& p) {
  SuiteResult out;
  const int band = verification_band(box);
  std::vector<ThresholdResult> trajectory;
  ViolationReport values;
  const DiscountedSolution sol = solve_discounted(p, box, {}, [&](const ValueTable& v) {
    values.merge(check_class_F(v, kDefaultVerifyTol, band));
    values.merge(check_extended_props(v, kDefaultVerifyTol, band));
    if (v.iteration_count() > 0) trajectory.push_back(extract_threshold(extract_policy(v), policy_band(box)));
    ++out.iterates;
  });
  out.value_violations = values.size();
  if (!values.empty()) {
    const auto& v = values.entries().front();
    out.first_value_violation = v.property_id + " " + v.states + " iteration " + std::to_string(v.iteration.value_or(0));
  }
  out.thresholds = check_iteration_thresholds(trajectory);
  for (const auto& v : out.thresholds.violations.entries()) {
    if (v.property_id == "Lemma2") {
      out.first_lemma2 = v.states + " at iteration " + std::to_string(v.iteration.value_or(0) + 1);
      break;
    }
  }
  const Solution4D s4 = solve_4d(p, box);
  out.thm1 = check_theorem1(s4.values, p, kDefaultVerifyTol, band).size();
  out.rule3 = check_renege_preference(s4.values, kDefaultVerifyTol, band).size();
  out.final_threshold = extract_threshold(sol.policy, head_empty_scan(box));
  return out;
}

void property_suites(Report& rep) {
  std::vector<std::string> d;
  bool pass = true;
  try {
    const RateParams p = discounted(45.0, 0.999);
    std::vector<ThresholdResult> finals;
    for (const TruncationBox box : {TruncationBox{40, 40}, TruncationBox{80, 80}}) {
      const auto t0 = std::chrono::steady_clock::now();
      const SuiteResult r = property_suite(box, p);
      const std::size_t lemma2 = r.thresholds.violations.count("Lemma2");
      const std::size_t thm3 = r.thresholds.violations.count("Thm3");
      d.push_back(fmt("box %dx%d (%.1f s, %zu iterates, value band %d, policy band %d):", box.x_max, box.q1_max,
                      seconds_since(t0), r.iterates, verification_band(box), policy_band(box)));
      d.push_back(fmt("  class F + extended inequalities on every iterate: %zu violations %s", r.value_violations,
                      r.first_value_violation.c_str()));
      d.push_back(fmt("  Theorem 1 (a)-(e) on the converged 4-D table: %zu violations; renege preference: %zu",
                      r.thm1, r.rule3));
      d.push_back(fmt("  per-iteration threshold type: %zu non-threshold iterates%s%s", lemma2,
                      r.first_lemma2.empty() ? "" : ", first ", r.first_lemma2.c_str()));
      d.push_back(fmt("  i_{n+1} <= i_n + 1: %zu violations", thm3));
      d.push_back("  extracted threshold " + r.final_threshold.describe());
      finals.push_back(r.final_threshold);
      pass = pass && r.value_violations == 0 && r.thm1 == 0 && r.rule3 == 0 && lemma2 == 0 && thm3 == 0;
    }
    const bool same = finals[0].same_threshold(finals[1]);
    d.push_back(fmt("thresholds identical across boxes: %s", same ? "yes" : "no"));
    pass = pass && same;
  } catch (const std::exception& e) {
    d.push_back(std::string("error: ") + e.what());
    pass = false;
  }
  rep.criterion("structural property suites on boxes 40 and 80", pass, d);
}

// Brute-force expectation trees, written independently of the solvers.

double tree3(const RateParams& p, const TruncationBox& box, int x, int q1, int l2, int depth) {
  if (depth == 0) return x + q1 + l2;
  const auto decide = [&](int a, int b, int c) {
    double v = tree3(p, box, a, b, c, depth - 1);
    if (c == 0 && a >= 1) v = std::min(v, tree3(p, box, a - 1, b, 1, depth - 1));
    if (c == 0 && a == 0 && b >= 1) v = std::min(v, tree3(p, box, 0, b - 1, 1, depth - 1));
    return v;
  };
  const double arrival = x == box.x_max ? decide(x, q1, l2) : decide(x + 1, q1, l2);
  const double processing = (x == 0 || q1 == box.q1_max) ? decide(x, q1, l2) : decide(x - 1, q1 + 1, l2);
  return (x + q1 + l2) + p.beta * (p.lambda * arrival + p.mu_p * processing +
                                   p.mm_rate() * decide(x, std::max(q1 - 1, 0), l2) + p.mu_sub6 * decide(x, q1, 0));
}

double tree4(const RateParams& p, const TruncationBox& box, SystemState s, int depth) {
  if (depth == 0) return s.total();
  const auto best = [&](const SystemState& t) {
    double v = std::numeric_limits<double>::infinity();
    for (Action a : admissible_actions(t)) {
      if (a == Action::RenegeFromMmWaveQueue && t.l1 == 1) continue;  // the renege takes the processing packet first
      const SystemState u = apply_action(t, a);
      if (u.q0 >= 1 && u.l1 == 0) continue;  // processing never idles while packets wait
      v = std::min(v, tree4(p, box, u, depth - 1));
    }
    return v;
  };
  SystemState arrival = s, processing = s, mm = s, sub6 = s;
  if (s.q0 + s.l1 < box.x_max) arrival.q0 += 1;
  if (s.l1 == 1 && s.q1 < box.q1_max) {
    processing.l1 = 0;
    processing.q1 += 1;
  }
  mm.q1 = std::max(s.q1 - 1, 0);
  sub6.l2 = 0;
  return s.total() + p.beta * (p.lambda * best(arrival) + p.mu_p * best(processing) + p.mm_rate() * best(mm) +
                               p.mu_sub6 * best(sub6));
}

void oracle_equivalence(Report& rep) {
  std::vector<std::string> d;
  bool pass = false;
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const RateParams p = discounted(45.0, 0.95);
    const TruncationBox box{6, 6};
    ValueTable v = ValueTable::initial(box, p.beta);
    for (int n = 0; n < 4; ++n) v = value_iteration_step(v, p);
    double worst3 = 0.0;
    for (int x = 0; x <= box.x_max; ++x)
      for (int q1 = 0; q1 <= box.q1_max; ++q1)
        for (int l2 = 0; l2 <= 1; ++l2) worst3 = std::max(worst3, std::abs(v(x, q1, l2) - tree3(p, box, x, q1, l2, 4)));
    ValueFunction4D w = ValueFunction4D::total_count(box);
    for (int n = 0; n < 4; ++n) w = bellman_operator_4d(w, p);
    double worst4 = 0.0;
    w.for_each_state([&](const SystemState& s) { worst4 = std::max(worst4, std::abs(w(s) - tree4(p, box, s, 4))); });
    const double secs = seconds_since(t0);
    d.push_back(fmt("collapsed J^4 vs tree: max |diff| = %.3e", worst3));
    d.push_back(fmt("4-D J^4 vs tree: max |diff| = %.3e", worst4));
    d.push_back(fmt("runtime %.3f s (need < 1 s)", secs));
    pass = worst3 < 1e-9 && worst4 < 1e-9 && secs < 1.0;
  } catch (const std::exception& e) {
    d.push_back(std::string("error: ") + e.what());
  }
  rep.criterion("value iteration equals 4-step brute force on 6x6", pass, d);
}

void collapse_consistency(Report& rep) {
  std::vector<std::string> d;
  bool pass = false;
  try {
    const RateParams p = discounted(45.0, 0.999);
    const TruncationBox box{40, 40};
    const SolveOptions opts;
    const DiscountedSolution s3 = solve_discounted(p, box, opts);
    const Solution4D s4 = solve_4d(p, box, opts);
    const int band = verification_band(box);
    double worst = 0.0;
    for (int x = 0; x <= box.x_max - band; ++x)
      for (int q1 = 0; q1 <= box.q1_max - band; ++q1)
        for (int l2 = 0; l2 <= 1; ++l2) {
          const CollapsedState c{x, q1, l2};
          worst = std::max(worst, std::abs(s3.values(c) - s4.values(expand(c))));
        }
    d.push_back(fmt("beta=0.999 box 40: %zu / %zu iterations, interior max |J3 - J4| = %.3e (need < %.1e)",
                    s3.iterations, s4.iterations, worst, 10 * opts.tol));
    pass = worst < 10 * opts.tol;
  } catch (const std::exception& e) {
    d.push_back(std::string("error: ") + e.what());
  }
  rep.criterion("collapsed and 4-D fixed points agree", pass, d);
}

void simulator_sanity(Report& rep) {
  std::vector<std::string> d;
  bool pass = true;
  try {
    for (PolicySpec pol : {PolicySpec::threshold(18), PolicySpec::maxweight(), PolicySpec::no_sub6()}) {
      SimConfig c = sim_base(2'000'000, 5, 3);
      c.params = raw_rates(pol.kind == PolicyKind::NoSub6 ? 30.0 : 45.0);
      c.policy = pol;
      const SimStats s = simulate(c);
      const bool little = std::abs(s.delay.mean - s.sojourn.mean) <= s.delay.ci + s.sojourn.ci;
      d.push_back(fmt("%s lambda=%g: Little %.5f+-%.5f sojourn %.5f+-%.5f (%s); conservation %s",
                      std::string(to_string(pol.kind)).c_str(), c.params.lambda, s.delay.mean, s.delay.ci,
                      s.sojourn.mean, s.sojourn.ci, little ? "agree" : "disagree",
                      s.all_conserved() ? "exact" : "BROKEN"));
      pass = pass && little && s.all_conserved();
    }
    // capacity one, mmWave only: empty -> processing -> mmWave queue -> empty
    const RateParams tiny{2.0, 3.0, 5.0, 1.0, 0.8, 0.0};
    const Uniformized u = uniformize(tiny);
    const double a = u.params.lambda, b = u.params.mu_p, cc = u.params.mm_rate();
    const double z = 1.0 / a + 1.0 / b + 1.0 / cc;
    const double expected = (1.0 / b + 1.0 / cc) / z;
    SimConfig c = sim_base(400'000, 8, 5);
    c.params = tiny;
    c.policy = PolicySpec::no_sub6();
    c.capacity = 1;
    const SimStats s = simulate(c);
    const bool chain = std::abs(s.occupancy.mean - expected) <= std::max(s.occupancy.ci, 1e-3);
    d.push_back(fmt("tiny chain occupancy %.5f+-%.5f, stationary %.5f (%s)", s.occupancy.mean, s.occupancy.ci,
                    expected, chain ? "match" : "mismatch"));
    pass = pass && chain;
  } catch (const std::exception& e) {
    d.push_back(std::string("error: ") + e.what());
    pass = false;
  }
  rep.criterion("simulator sanity", pass, d);
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  Report rep;
  oracle_equivalence(rep);
  collapse_consistency(rep);
  simulator_sanity(rep);
  threshold_reproduction(rep);
  threshold_monotonicity(rep);
  blockage_improvement(rep);
  maxweight_comparison(rep);
  property_suites(rep);
  std::cout << fmt("total %.1f s", seconds_since(t0)) << '\n';
  return rep.all_ok() ? 0 : 1;
}
