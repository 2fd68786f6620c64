// Command-line front end for the experiment harness.

#include <iostream>

#include <CLI11.hpp>

#include "bgpoison/harness.hpp"

namespace bp = bgpoison;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 1;
};

bp::ExperimentConfig load(const Options& o) {
  bp::ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = bp::load_config(o.config, o.seed);
  } else {
    if (!o.seed) throw bp::ConfigError("either --config or --seed is required");
    cfg = bp::parse_config(nlohmann::json::object(), o.seed);
  }
  if (!o.out.empty()) cfg.out = o.out;
  if (o.jobs < 1) throw bp::ConfigError("--jobs must be positive");
  return cfg;
}

void print(const bp::ResultBundle& b) {
  for (const auto& f : b.files) std::cout << (b.dir / f).string() << '\n';
}

int run(const std::string& command, const Options& o) {
  if (command == "report") {
    const std::filesystem::path dir = o.out.empty() ? (o.config.empty() ? "results" : load(o).out) : o.out;
    const auto rep = bp::build_report(dir);
    bp::detail::write_text(dir / "report.json", rep.dump(2) + "\n");
    std::cout << rep.dump(2) << '\n';
    return 0;
  }
  const auto cfg = load(o);
  const std::filesystem::path out = cfg.out;
  if (command == "gen-topology") {
    print(bp::run_gen_topology(cfg, out));
  } else if (command == "train-dfoh") {
    print(bp::run_train_dfoh(cfg, out, o.jobs));
  } else if (command == "train-beam") {
    print(bp::run_train_beam(cfg, out));
  } else if (command == "attack-dfoh") {
    print(bp::run_dfoh_campaign(cfg, out, o.jobs));
  } else if (command == "attack-beam") {
    print(bp::run_beam_campaign(cfg, out, o.jobs));
  } else if (command == "eval-monitors") {
    print(bp::run_monitor_sweep(cfg, out, o.jobs));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BGP detector poisoning experiments"};
  app.set_version_flag("--version", std::string(bp::kVersion));
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  const std::pair<const char*, const char*> commands[] = {
      {"gen-topology", "build the world and write its topology, metadata and public monitors"},
      {"train-dfoh", "train the link classifier and write it with its knowledge base"},
      {"train-beam", "train the AS embedding and log scores over the public stream"},
      {"attack-dfoh", "plan and run knowledge-base poisoning for every attacker/victim pair"},
      {"attack-beam", "plan and run threshold pollution for each attacker"},
      {"eval-monitors", "sweep private-monitor deployments over recorded poison links"},
      {"report", "summarise the campaign outputs in --out"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config, "JSON experiment config");
    sub->add_option("--seed", seed, "root seed (overrides the config)");
    sub->add_option("--out", o.out, "output directory (overrides the config)");
    sub->add_option("--jobs", o.jobs, "worker threads");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) o.seed = seed;
  try {
    return run(sub->get_name(), o);
  } catch (const bp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const bp::ParseError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const bp::DependencyError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const bp::NotFoundError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const bp::GenerationError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const bp::InvalidScenarioError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const bp::TrainingError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 4;
  }
}
