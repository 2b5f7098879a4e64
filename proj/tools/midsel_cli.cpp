// midsel: run scenarios and the acceptance suite from the command line.
// Exit codes: 0 all checks pass, 1 a check failed, 2 bad config.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include "midsel/midsel.hpp"

namespace {

constexpr int kPass = 0, kFail = 1, kConfig = 2;

midsel::ScenarioConfig resolve(const std::string& what) {
  if (std::filesystem::is_regular_file(what)) return midsel::load_scenario_file(what);
  const auto& lib = midsel::builtin_scenario_texts();
  if (lib.count(what)) return midsel::builtin_scenario(what);
  throw midsel::ConfigError("'" + what + "' is neither a config file nor a built-in scenario (see list-scenarios)");
}

int cmd_run(const std::string& what, const std::string& out, const midsel::RunOptions& opt) {
  const auto cfg = resolve(what);
  const std::filesystem::path dir = out.empty() ? std::filesystem::path("out") / cfg.name : std::filesystem::path(out);
  const auto r = midsel::run_scenario(cfg, dir, opt);
  for (const auto& c : r.checks) std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
  if (r.failure_time) std::cout << "ABORT " << r.failure << '\n';
  std::cout << cfg.name << ": " << (r.all_pass() ? "all checks pass" : "checks failed") << " in "
            << midsel::format_number(r.wall_seconds) << " s; artifacts in " << dir.string() << '\n';
  return r.all_pass() ? kPass : kFail;
}

int cmd_check(const std::string& out, const midsel::RunOptions& opt) {
  std::ofstream log;
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    log.open(std::filesystem::path(out) / "acceptance.txt");
  }
  const auto results = midsel::acceptance::run_all(opt, [&](const midsel::acceptance::Outcome& o) {
    const auto l = midsel::acceptance::line(o);
    std::cout << l << std::endl;
    if (log) log << l << '\n';
  });
  int failed = 0;
  for (const auto& o : results) failed += !o.pass;
  std::cout << (results.size() - failed) << "/" << results.size() << " criteria pass\n";
  return failed ? kFail : kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Midpoint-selection population dynamics: solvers, scenarios and acceptance checks"};
  app.require_subcommand(1);
  std::string out;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<CLI::Option*> seed_opts;
  auto add_flags = [&](CLI::App* sub) {
    sub->add_option("--out", out, "artifact directory");
    seed_opts.push_back(sub->add_option("--seed", seed, "first particle seed (further seeds count up from it)"));
    sub->add_option("--threads", threads, "worker threads for particle seeds")->check(CLI::PositiveNumber);
  };

  std::string target;
  auto* run = app.add_subcommand("run", "run a scenario config file or a built-in scenario");
  run->add_option("config", target, "path to a JSON config, or a built-in scenario name")->required();
  add_flags(run);
  auto* list = app.add_subcommand("list-scenarios", "list built-in scenarios");
  auto* check = app.add_subcommand("check", "run the acceptance suite");
  add_flags(check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kConfig;
  }

  midsel::RunOptions opt;
  opt.threads = threads;
  for (auto* o : seed_opts)
    if (o->count()) opt.seed = seed;
  try {
    if (*list) {
      for (const auto& name : midsel::builtin_scenario_names()) std::cout << name << '\n';
      return kPass;
    }
    if (*run) return cmd_run(target, out, opt);
    if (*check) return cmd_check(out, opt);
  } catch (const midsel::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const midsel::HypothesisViolation& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFail;
  }
  return kConfig;
}
