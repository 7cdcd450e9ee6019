// mmsched: solve, simulate and verify the sub-6 GHz / mmWave scheduling model.

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <optional>
#include <string>

#include "mmsched/experiment.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> out;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<int> m;
  std::optional<double> beta;
  std::optional<int> box;
  std::optional<std::uint64_t> horizon;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "key = value configuration file");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--jobs", o.jobs, "worker threads for replications")->check(CLI::NonNegativeNumber);
  sub->add_option("--seed", o.seed, "base seed; replication r uses seed + r");
  sub->add_option("--lambda", o.lambda, "arrival rate (replaces the lambda lists)")->check(CLI::NonNegativeNumber);
  sub->add_option("--m", o.m, "threshold (replaces m_list and m_per_lambda)")->check(CLI::NonNegativeNumber);
  sub->add_option("--beta", o.beta, "discount factor")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--box", o.box, "truncation box side for both x and q1")->check(CLI::PositiveNumber);
  sub->add_option("--horizon", o.horizon, "simulated events per replication")->check(CLI::PositiveNumber);
}

mmsched::ExperimentConfig build_config(const Overrides& o) {
  using namespace mmsched;
  ExperimentConfig c = make_config(o.config.empty() ? ConfigMap{} : load_config_file(o.config));
  if (o.out) c.out_dir = *o.out;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.seed) c.seed = *o.seed;
  if (o.lambda) {
    c.raw.lambda = *o.lambda;
    c.lambda_list = {*o.lambda};
    c.fig5_lambdas = {*o.lambda};
  }
  if (o.m) {
    c.m_list = {*o.m};
    c.m_per_lambda.assign(c.lambda_list.size(), *o.m);
  }
  if (o.beta) {
    if (!(*o.beta < 1.0)) throw InvalidConfig("beta must be below 1");
    c.raw.beta = *o.beta;
    std::erase_if(c.betas, [&](double b) { return b >= *o.beta; });
    c.betas.push_back(*o.beta);
  }
  if (o.box) {
    c.box = {*o.box, *o.box};
    c.box.validate();
  }
  if (o.horizon) c.horizon = *o.horizon;
  refresh_hash(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace mmsched;
  CLI::App app{"Delay-optimal sub-6 GHz / mmWave scheduling: solver, simulator, verifier"};
  app.require_subcommand(1);

  Overrides o;
  bool inject = false;
  auto* solve = app.add_subcommand("solve", "value iteration; writes values.csv, policy.csv, threshold.txt");
  auto* sweep = app.add_subcommand("sweep-threshold", "simulated delay versus m; writes fig4_<lambda>.csv");
  auto* blockage = app.add_subcommand("sweep-blockage", "relative improvement over (lambda, p_na); writes fig5.csv");
  auto* compare = app.add_subcommand("compare-maxweight", "D_m against MaxWeight; writes fig6.csv");
  auto* verify = app.add_subcommand("verify", "structural checks; writes violations.csv");
  for (auto* sub : {solve, sweep, blockage, compare, verify}) add_common(sub, o);
  verify->add_flag("--inject-perturbation", inject, "lower one 4-D value by 1 before checking (test hook)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const ExperimentConfig c = build_config(o);
    if (solve->parsed()) {
      cmd_solve(c, std::cout);
    } else if (sweep->parsed()) {
      cmd_sweep_threshold(c, std::cout);
    } else if (blockage->parsed()) {
      cmd_sweep_blockage(c, std::cout);
    } else if (compare->parsed()) {
      cmd_compare_maxweight(c, std::cout);
    } else if (verify->parsed()) {
      const VerifyOutcome v = cmd_verify(c, std::cout, inject);
      return v.report.empty() ? kExitOk : kExitFailure;
    }
    return kExitOk;
  } catch (const InvalidConfig& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NonPositiveRate& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const AssumptionViolated& e) {
    std::cerr << "precondition failed: " << e.what() << '\n';
    return kExitPrecondition;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
