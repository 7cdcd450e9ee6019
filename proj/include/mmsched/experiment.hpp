#pragma once

// Experiment configuration and the commands behind the mmsched tool. Each
// command writes CSV files into an output directory; every CSV starts with a
// "# config_hash=..." line identifying the effective configuration.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mmsched/bellman4d.hpp"
#include "mmsched/core_model.hpp"
#include "mmsched/errors.hpp"
#include "mmsched/mdp_solver.hpp"
#include "mmsched/policies.hpp"
#include "mmsched/simulator.hpp"
#include "mmsched/verifier.hpp"

namespace mmsched {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitPrecondition = 3 };

/// Raw `key = value` pairs after comment stripping, in key order.
using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw InvalidConfig("key '" + key + "': '" + text + "' is not a number");
  }
  return v;
}

inline long long parse_int(const std::string& key, const std::string& text) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InvalidConfig("key '" + key + "': '" + text + "' is not an integer");
  }
  return v;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "lambda",      "mu_p",         "mu_mm",   "mu_sub6",     "p_a",          "beta",
      "betas",       "x_max",        "q1_max",  "tol",         "horizon",      "warmup",
      "seed",        "replications", "jobs",    "m_list",      "lambda_list",  "p_na_grid",
      "fig5_lambdas", "fig5_m_list", "m_per_lambda", "out_dir"};
  return keys;
}

/// Parses `key = value` lines; `#` starts a comment. Unknown or repeated keys
/// and lines without '=' are rejected.
inline ConfigMap parse_config_text(std::string_view text) {
  ConfigMap out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidConfig("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    if (!known_config_keys().contains(key)) throw InvalidConfig("unknown config key '" + key + "'");
    if (value.empty()) throw InvalidConfig("key '" + key + "' has no value");
    if (!out.emplace(key, value).second) throw InvalidConfig("key '" + key + "' given twice");
  }
  return out;
}

inline ConfigMap load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

struct ExperimentConfig {
  RateParams raw{45.0, 100.0, 100.0, 1.0, 0.6, 0.999};
  std::vector<double> betas = default_betas();
  TruncationBox box{40, 40};
  double tol = 1e-9;
  std::uint64_t horizon = 2'000'000;
  std::optional<std::uint64_t> warmup;
  std::uint64_t seed = 1;
  int replications = 5;
  int jobs = 1;
  std::vector<int> m_list;
  std::vector<double> lambda_list = {30, 35, 40, 45, 50, 55};
  std::vector<double> p_na_grid = {0.0, 0.1, 0.2, 0.3, 0.35, 0.38, 0.39, 0.395};
  std::vector<double> fig5_lambdas = {30, 40, 50, 60};
  std::vector<int> fig5_m_list = {0, 1, 2, 5, 10, 18};
  std::vector<int> m_per_lambda;
  std::string out_dir = "out";
  /// Canonical key=value listing of every effective setting.
  std::string canonical;

  std::uint64_t hash() const { return detail::fnv1a64(canonical); }
  std::string hash_hex() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << hash();
    return os.str();
  }

  SimConfig sim() const {
    SimConfig c;
    c.params = raw;
    c.horizon_events = horizon;
    c.warmup_events = warmup;
    c.seed = seed;
    c.replications = replications;
    c.jobs = jobs;
    return c;
  }

  SolveOptions solve_options() const {
    SolveOptions o;
    o.tol = tol;
    return o;
  }
};

namespace detail {

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
  return os.str();
}

inline std::string canonical_listing(const ExperimentConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "beta=" << c.raw.beta << "\nbetas=" << join(c.betas) << "\nfig5_lambdas=" << join(c.fig5_lambdas)
     << "\nfig5_m_list=" << join(c.fig5_m_list) << "\nhorizon=" << c.horizon << "\nlambda=" << c.raw.lambda
     << "\nlambda_list=" << join(c.lambda_list) << "\nm_list=" << join(c.m_list)
     << "\nm_per_lambda=" << join(c.m_per_lambda) << "\nmu_mm=" << c.raw.mu_mm << "\nmu_p=" << c.raw.mu_p
     << "\nmu_sub6=" << c.raw.mu_sub6 << "\np_a=" << c.raw.p_a << "\np_na_grid=" << join(c.p_na_grid)
     << "\nq1_max=" << c.box.q1_max << "\nreplications=" << c.replications << "\nseed=" << c.seed
     << "\ntol=" << c.tol << "\nwarmup=" << (c.warmup ? std::to_string(*c.warmup) : std::string("default"))
     << "\nx_max=" << c.box.x_max << "\n";
  return os.str();
}

}  // namespace detail

/// Builds a typed configuration from parsed pairs. Settings absent from the
/// map keep the paper-scenario defaults. `jobs` and `out_dir` do not enter
/// the hash since they do not change results.
inline ExperimentConfig make_config(const ConfigMap& kv) {
  ExperimentConfig c;
  const auto num = [&](const char* key, double& dst) {
    if (auto it = kv.find(key); it != kv.end()) dst = detail::parse_double(key, it->second);
  };
  const auto nonneg_int = [&](const char* key, auto& dst) {
    if (auto it = kv.find(key); it != kv.end()) {
      const long long v = detail::parse_int(key, it->second);
      if (v < 0) throw InvalidConfig("key '" + std::string(key) + "' must be nonnegative");
      dst = static_cast<std::remove_reference_t<decltype(dst)>>(v);
    }
  };
  const auto dlist = [&](const char* key, std::vector<double>& dst) {
    if (auto it = kv.find(key); it != kv.end()) {
      dst.clear();
      for (const auto& item : detail::split_list(it->second)) dst.push_back(detail::parse_double(key, item));
    }
  };
  const auto ilist = [&](const char* key, std::vector<int>& dst) {
    if (auto it = kv.find(key); it != kv.end()) {
      dst.clear();
      for (const auto& item : detail::split_list(it->second)) {
        const long long v = detail::parse_int(key, item);
        if (v < 0) throw InvalidConfig("key '" + std::string(key) + "' entries must be nonnegative");
        dst.push_back(static_cast<int>(v));
      }
    }
  };

  num("lambda", c.raw.lambda);
  num("mu_p", c.raw.mu_p);
  num("mu_mm", c.raw.mu_mm);
  num("mu_sub6", c.raw.mu_sub6);
  num("p_a", c.raw.p_a);
  num("beta", c.raw.beta);
  num("tol", c.tol);
  dlist("betas", c.betas);
  nonneg_int("x_max", c.box.x_max);
  nonneg_int("q1_max", c.box.q1_max);
  nonneg_int("horizon", c.horizon);
  if (kv.contains("warmup")) {
    std::uint64_t w = 0;
    nonneg_int("warmup", w);
    c.warmup = w;
  }
  nonneg_int("seed", c.seed);
  nonneg_int("replications", c.replications);
  nonneg_int("jobs", c.jobs);
  ilist("m_list", c.m_list);
  dlist("lambda_list", c.lambda_list);
  dlist("p_na_grid", c.p_na_grid);
  dlist("fig5_lambdas", c.fig5_lambdas);
  ilist("fig5_m_list", c.fig5_m_list);
  ilist("m_per_lambda", c.m_per_lambda);
  if (auto it = kv.find("out_dir"); it != kv.end()) c.out_dir = it->second;

  if (!(c.raw.beta >= 0.0 && c.raw.beta < 1.0)) throw InvalidConfig("beta must lie in [0, 1)");
  if (!(c.raw.p_a >= 0.0 && c.raw.p_a <= 1.0)) throw InvalidConfig("p_a must lie in [0, 1]");
  if (!(c.tol > 0.0)) throw InvalidConfig("tol must be positive");
  for (double p : c.p_na_grid)
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidConfig("p_na_grid entries must lie in [0, 1]");
  c.box.validate();
  c.canonical = detail::canonical_listing(c);
  return c;
}

/// Recomputes the canonical listing after programmatic overrides.
inline void refresh_hash(ExperimentConfig& c) { c.canonical = detail::canonical_listing(c); }

namespace detail {

inline std::ofstream open_output(const ExperimentConfig& c, const std::string& name) {
  std::filesystem::create_directories(c.out_dir);
  const auto path = std::filesystem::path(c.out_dir) / name;
  std::ofstream os(path);
  if (!os) throw InvalidConfig("cannot write " + path.string());
  os << "# config_hash=" << c.hash_hex() << '\n';
  os << std::setprecision(10);
  return os;
}

/// "45" for integral rates, otherwise the shortest round-trip text.
inline std::string rate_label(double v) {
  std::ostringstream os;
  os << std::setprecision(15) << v;
  return os.str();
}

inline RateParams with_lambda(RateParams p, double lambda) {
  p.lambda = lambda;
  return p;
}

}  // namespace detail

/// Solves the average-delay threshold problem; writes values.csv, policy.csv
/// and threshold.txt for the final discount factor.
inline AverageDelayThreshold cmd_solve(const ExperimentConfig& c, std::ostream& log) {
  const RateParams u = uniformize(c.raw).params;
  AverageDelayThreshold res = average_delay_threshold(u, c.box, c.betas, c.solve_options());
  const DiscountedSolution& sol = res.solution;
  {
    auto os = detail::open_output(c, "values.csv");
    os << "x,q1,l2,value\n";
    os << std::setprecision(17);
    for (int x = 0; x <= c.box.x_max; ++x)
      for (int q1 = 0; q1 <= c.box.q1_max; ++q1)
        for (int l2 = 0; l2 <= 1; ++l2) os << x << ',' << q1 << ',' << l2 << ',' << sol.values(x, q1, l2) << '\n';
  }
  {
    auto os = detail::open_output(c, "policy.csv");
    os << "x,q1,l2,choice,action\n";
    for (int x = 0; x <= c.box.x_max; ++x)
      for (int q1 = 0; q1 <= c.box.q1_max; ++q1)
        for (int l2 = 0; l2 <= 1; ++l2) {
          const CollapsedState s{x, q1, l2};
          const Sub6Choice ch = l2 == 1 ? Sub6Choice::NotApplicable : sol.policy.choice(x, q1);
          const char* name = ch == Sub6Choice::Adding ? "adding" : ch == Sub6Choice::NotAdding ? "not-adding" : "n/a";
          os << x << ',' << q1 << ',' << l2 << ',' << name << ',' << to_string(sol.policy.action(s)) << '\n';
        }
  }
  {
    auto os = detail::open_output(c, "threshold.txt");
    os << "m=" << res.threshold.describe() << '\n';
    for (const auto& bt : res.trajectory) {
      os << "beta=" << bt.beta << " m=" << bt.threshold.describe() << " interior=" << bt.interior.describe()
         << " iterations=" << bt.iterations << '\n';
    }
  }
  log << "threshold m=" << res.threshold.describe() << '\n';
  return res;
}

inline std::vector<int> default_m_list() {
  std::vector<int> ms;
  for (int m = 0; m <= 30; ++m) ms.push_back(m);
  return ms;
}

struct ThresholdSweep {
  double lambda = 0.0;
  std::vector<SweepRow> rows;
};

inline void write_runs(const ExperimentConfig& c, const std::vector<RunRecord>& runs, const std::string& name) {
  auto os = detail::open_output(c, name);
  write_runs_header(os);
  for (const auto& r : runs) write_run_row(os, r);
}

/// One fig4_<lambda>.csv per arrival rate plus runs_sweep.csv.
inline std::vector<ThresholdSweep> cmd_sweep_threshold(const ExperimentConfig& c, std::ostream& log) {
  const std::vector<int> ms = c.m_list.empty() ? default_m_list() : c.m_list;
  if (c.lambda_list.empty()) throw InvalidConfig("lambda_list is empty");
  std::vector<ThresholdSweep> out;
  std::vector<RunRecord> runs;
  for (double lambda : c.lambda_list) {
    const RateParams raw = detail::with_lambda(c.raw, lambda);
    ThresholdSweep sw{lambda, sweep_threshold(raw, ms, c.sim())};
    auto os = detail::open_output(c, "fig4_" + detail::rate_label(lambda) + ".csv");
    os << "m,avg_delay,ci\n";
    for (const auto& row : sw.rows) {
      os << row.m << ',' << row.stats.delay.mean << ',' << row.stats.delay.ci << '\n';
      runs.push_back({raw, PolicySpec::threshold(row.m), row.stats, c.seed, c.horizon});
    }
    log << "lambda=" << lambda << " argmin m=" << sweep_argmin(sw.rows).m << '\n';
    out.push_back(std::move(sw));
  }
  write_runs(c, runs, "runs_sweep.csv");
  return out;
}

enum class CensorFlag : int { None = 0, MmWaveOnlyUnstable = 1, BeyondBorder = 2 };

struct BlockagePoint {
  double lambda = 0.0;
  double p_na = 0.0;
  double w_hat = std::numeric_limits<double>::quiet_NaN();
  int best_m = -1;
  CensorFlag flag = CensorFlag::None;
};

/// Relative improvement over the (lambda, p_na) grid. For each point the
/// threshold with the smallest D_m delay among fig5_m_list is used.
inline std::vector<BlockagePoint> cmd_sweep_blockage(const ExperimentConfig& c, std::ostream& log) {
  if (c.fig5_lambdas.empty() || c.p_na_grid.empty() || c.fig5_m_list.empty()) {
    throw InvalidConfig("fig5_lambdas, p_na_grid and fig5_m_list must be non-empty");
  }
  std::vector<BlockagePoint> out;
  std::vector<RunRecord> runs;
  for (double lambda : c.fig5_lambdas) {
    for (double p_na : c.p_na_grid) {
      RateParams raw = detail::with_lambda(c.raw, lambda);
      raw.p_a = 1.0 - p_na;
      BlockagePoint pt{lambda, p_na};
      if (!stability_region(raw).stable_with_sub6) {
        pt.flag = CensorFlag::BeyondBorder;
        out.push_back(pt);
        continue;
      }
      std::optional<Improvement> best;
      for (int m : c.fig5_m_list) {
        Improvement imp = relative_improvement(raw, m, c.sim());
        runs.push_back({raw, PolicySpec::threshold(m), imp.with_sub6, c.seed, c.horizon});
        if (!best || imp.delay_with < best->delay_with) {
          best = std::move(imp);
          pt.best_m = m;
        }
      }
      runs.push_back({raw, PolicySpec::no_sub6(), best->without_sub6, c.seed, c.horizon});
      pt.w_hat = best->w_hat;
      pt.flag = best->censored ? CensorFlag::MmWaveOnlyUnstable : CensorFlag::None;
      log << "lambda=" << lambda << " p_na=" << p_na << " W_hat=" << pt.w_hat << " m=" << pt.best_m << '\n';
      out.push_back(pt);
    }
  }
  auto os = detail::open_output(c, "fig5.csv");
  os << "lambda,p_na,W_hat,censored_flag\n";
  for (const auto& pt : out) {
    os << pt.lambda << ',' << pt.p_na << ',';
    if (pt.flag != CensorFlag::BeyondBorder) os << pt.w_hat;
    os << ',' << static_cast<int>(pt.flag) << '\n';
  }
  write_runs(c, runs, "runs_blockage.csv");
  return out;
}

/// Argmin row of a fig4 CSV written by cmd_sweep_threshold.
inline int read_sweep_argmin(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("no threshold sweep output at " + path.string());
  std::string line;
  std::optional<std::pair<double, int>> best;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("m,", 0) == 0) continue;
    const auto cells = detail::split_list(line);
    if (cells.size() < 2) throw InvalidConfig("malformed row in " + path.string());
    const int m = static_cast<int>(detail::parse_int("m", cells[0]));
    const double d = detail::parse_double("avg_delay", cells[1]);
    if (!best || d < best->first) best = {d, m};
  }
  if (!best) throw InvalidConfig("threshold sweep " + path.string() + " has no rows");
  return best->second;
}

/// D_m against MaxWeight per arrival rate. Thresholds come from
/// m_per_lambda or, failing that, from the fig4 files in the output directory.
inline std::vector<MaxWeightRow> cmd_compare_maxweight(const ExperimentConfig& c, std::ostream& log) {
  if (c.lambda_list.empty()) throw InvalidConfig("lambda_list is empty");
  std::vector<int> ms = c.m_per_lambda;
  if (ms.empty()) {
    for (double lambda : c.lambda_list) {
      ms.push_back(read_sweep_argmin(std::filesystem::path(c.out_dir) / ("fig4_" + detail::rate_label(lambda) + ".csv")));
    }
  }
  if (ms.size() != c.lambda_list.size()) throw InvalidConfig("m_per_lambda needs one entry per lambda_list entry");
  std::vector<RateParams> params;
  for (double lambda : c.lambda_list) params.push_back(detail::with_lambda(c.raw, lambda));
  const auto rows = compare_maxweight(params, ms, c.sim());
  auto os = detail::open_output(c, "fig6.csv");
  os << "lambda,m,delay_Dm,delay_MW,tput_Dm,tput_MW,ci_delay_Dm,ci_delay_MW,ci_tput_Dm,ci_tput_MW\n";
  std::vector<RunRecord> runs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << r.lambda << ',' << r.m << ',' << r.dm.delay.mean << ',' << r.maxweight.delay.mean << ','
       << r.dm.throughput.mean << ',' << r.maxweight.throughput.mean << ',' << r.dm.delay.ci << ','
       << r.maxweight.delay.ci << ',' << r.dm.throughput.ci << ',' << r.maxweight.throughput.ci << '\n';
    runs.push_back({params[i], PolicySpec::threshold(r.m), r.dm, c.seed, c.horizon});
    runs.push_back({params[i], PolicySpec::maxweight(), r.maxweight, c.seed, c.horizon});
    log << "lambda=" << r.lambda << " delay Dm=" << r.dm.delay.mean << " MW=" << r.maxweight.delay.mean << '\n';
  }
  write_runs(c, runs, "runs_maxweight.csv");
  return rows;
}

struct VerifyOutcome {
  ViolationReport report;
  /// Literal total-count ordering, reported but not counted as a failure.
  ViolationReport informational;
  IterationThresholdCheck thresholds;
  std::size_t iterates = 0;
};

/// Runs every check on the instance at `beta`: class F and extended
/// inequalities on every iterate, the per-iteration threshold trajectory,
/// and the priority relations on the 4-D fixed point. With
/// inject_perturbation the 4-D table is lowered by 1 at one interior state
/// first, which must surface as violations.
inline VerifyOutcome cmd_verify(const ExperimentConfig& c, std::ostream& log, bool inject_perturbation = false) {
  if (!check_fastlane_assumption(c.raw)) {
    throw AssumptionViolated("rates violate 1/(p_a mu_mm) + 1/mu_p < 1/mu_sub6");
  }
  const RateParams u = uniformize(c.raw).params;
  const int band = verification_band(c.box);
  VerifyOutcome out;
  std::vector<ThresholdResult> trajectory;
  const DiscountedSolution sol = solve_discounted(u, c.box, c.solve_options(), [&](const ValueTable& v) {
    out.report.merge(check_class_F(v, kDefaultVerifyTol, band));
    out.report.merge(check_extended_props(v, kDefaultVerifyTol, band));
    if (v.iteration_count() > 0) trajectory.push_back(extract_threshold(extract_policy(v), policy_band(c.box)));
    ++out.iterates;
  });
  out.thresholds = check_iteration_thresholds(trajectory);
  out.report.merge(out.thresholds.violations);

  Solution4D s4 = solve_4d(u, c.box, c.solve_options());
  if (inject_perturbation) {
    // an idle-processing state: its margin in the A1-over-hold relation is
    // well below 1 for the usual discount factors
    const SystemState q{1, 0, 3, 0};
    s4.values(q) -= 1.0;
    log << "perturbed J" << to_string(q) << " by -1\n";
  }
  out.report.merge(check_theorem1(s4.values, u, kDefaultVerifyTol, band));
  out.report.merge(check_renege_preference(s4.values, kDefaultVerifyTol, band));
  out.informational = check_total_count_order(s4.values, kDefaultVerifyTol, band);

  auto os = detail::open_output(c, "violations.csv");
  out.report.write_csv(os);
  log << "iterates checked=" << out.iterates << " violations=" << out.report.size()
      << " total-count-order (informational)=" << out.informational.size()
      << " final threshold=" << extract_threshold(sol.policy, head_empty_scan(c.box)).describe() << '\n';
  return out;
}

}  // namespace mmsched
