#include <CLI11.hpp>
#include <iostream>

#include "meshfl/controller.hpp"
#include "meshfl/error.hpp"

using namespace meshfl;

namespace {

bool is_validation_error(Errc code) {
  switch (code) {
    case Errc::InvalidScenario:
    case Errc::UnknownField:
    case Errc::UnknownTrainer:
    case Errc::ParseError: return true;
    default: return false;
  }
}

int fail(const Error& e) {
  std::cerr << "meshfl: " << e.what() << '\n';
  return is_validation_error(e.code()) ? 1 : 2;
}

Topology make_topology(const std::string& kind, std::size_t n, double p, std::uint64_t seed, std::size_t center) {
  if (kind == "fully") return Topology::fully_connected(n);
  if (kind == "star") return Topology::star(n, center);
  if (kind == "ring") return Topology::ring(n);
  if (kind == "random") return Topology::random_connected(n, p, seed);
  throw Error(Errc::InvalidScenario, "unknown topology kind '" + kind + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meshfl: run federated learning scenarios over a simulated node mesh"};
  app.require_subcommand(1);

  std::string scenario_file, out_dir;
  std::optional<std::uint64_t> seed;
  std::string transport;
  auto* run = app.add_subcommand("run", "deploy a scenario and wait for it to finish");
  run->add_option("scenario", scenario_file, "scenario YAML file")->required();
  run->add_option("--out", out_dir, "directory for report, metrics and logs");
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--transport", transport, "inproc or tcp")->check(CLI::IsMember({"inproc", "tcp"}));

  auto* validate = app.add_subcommand("validate", "check a scenario file without running it");
  validate->add_option("scenario", scenario_file, "scenario YAML file")->required();

  std::string kind, topo_out;
  std::size_t n = 0, center = 0;
  double p = 0.5;
  std::uint64_t topo_seed = 0;
  auto* topology = app.add_subcommand("topology", "generate an adjacency file");
  topology->add_option("kind", kind, "fully, star, ring or random")->required();
  topology->add_option("--n", n, "node count")->required();
  topology->add_option("--p", p, "edge probability (random)");
  topology->add_option("--seed", topo_seed, "generator seed (random)");
  topology->add_option("--center", center, "center node (star)");
  topology->add_option("--out", topo_out, "output file")->required();

  std::string records_file;
  double target = 0.9;
  auto* report = app.add_subcommand("report", "recompute a summary from exported metrics");
  report->add_option("records", records_file, "metrics.csv or metrics.json")->required();
  report->add_option("--f1-target", target, "f1 threshold for time-to-threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      auto cfg = load_scenario(scenario_file);
      if (seed) cfg.seed = *seed;
      if (transport == "tcp") cfg.transport.kind = TransportKind::Tcp;
      if (transport == "inproc") cfg.transport.kind = TransportKind::Inproc;
      validate_scenario(cfg);
      const auto result = run_scenario(cfg, out_dir);
      std::cout << summary_text(result);
      return result.complete ? 0 : 2;
    }
    if (*validate) {
      const auto cfg = load_scenario(scenario_file);
      validate_scenario(cfg);
      std::cout << "ok: " << cfg.name << " (" << to_string(cfg.architecture) << ", " << cfg.n() << " nodes, "
                << cfg.training.rounds << " rounds)\n";
      return 0;
    }
    if (*topology) {
      save_topology_file(make_topology(kind, n, p, topo_seed, center), topo_out);
      return 0;
    }
    if (*report) {
      const auto format = std::filesystem::path(records_file).extension() == ".json" ? ExportFormat::Json
                                                                                     : ExportFormat::Csv;
      std::cout << summary_text(summarize_records(import_records(records_file, format), target), target);
      return 0;
    }
  } catch (const Error& e) {
    return fail(e);
  } catch (const std::exception& e) {
    std::cerr << "meshfl: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
