#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "meshfl/controller.hpp"
#include "meshfl/error.hpp"

namespace meshfl {

namespace {

[[noreturn]] void invalid(const std::string& why) { throw Error(Errc::InvalidScenario, why); }

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) invalid(where + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw Error(Errc::UnknownField, where.empty() ? key : where + "." + key);
  }
}

template <typename T>
T get(const YAML::Node& node, const char* key, T fallback, const std::string& where) {
  const auto value = node[key];
  if (!value) return fallback;
  try {
    return value.as<T>();
  } catch (const YAML::Exception&) {
    invalid((where.empty() ? "" : where + ".") + key + " has the wrong type");
  }
}

TopologyKind parse_topology_kind(const std::string& text) {
  for (auto k : {TopologyKind::FullyConnected, TopologyKind::Star, TopologyKind::Ring, TopologyKind::Random,
                 TopologyKind::Custom})
    if (to_string(k) == text) return k;
  invalid("unknown topology kind '" + text + "'");
}

Architecture parse_arch(const std::string& text) {
  std::string upper = text;
  std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
  try {
    return parse_architecture(upper);
  } catch (const Error&) {
    invalid("unknown architecture '" + text + "'");
  }
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& yaml_text, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
  if (!root.IsMap()) invalid("scenario must be a mapping");
  check_keys(root, "",
             {"name", "architecture", "topology", "dataset", "trainer", "aggregator", "partition", "rounds",
              "epochs", "round_timeout_s", "monitor_period_s", "heartbeat_period_s", "f1_target", "transport",
              "seed", "schedule", "faults"});
  for (const char* required : {"name", "architecture", "topology", "dataset", "trainer"})
    if (!root[required]) invalid(std::string("missing required key '") + required + "'");

  ScenarioConfig cfg;
  cfg.name = get<std::string>(root, "name", "", "");
  cfg.architecture = parse_arch(get<std::string>(root, "architecture", "DFL", ""));
  cfg.seed = get<std::uint64_t>(root, "seed", 0, "");

  const auto topo = root["topology"];
  check_keys(topo, "topology", {"kind", "n", "p", "seed", "center", "file"});
  cfg.topology.kind = parse_topology_kind(get<std::string>(topo, "kind", "fully", "topology"));
  cfg.topology.n = get<std::size_t>(topo, "n", 0, "topology");
  cfg.topology.p = get<double>(topo, "p", 0.5, "topology");
  if (topo["seed"]) cfg.topology.seed = get<std::uint64_t>(topo, "seed", 0, "topology");
  cfg.topology.center = get<NodeId>(topo, "center", 0, "topology");
  if (topo["file"]) {
    std::filesystem::path file = get<std::string>(topo, "file", "", "topology");
    if (file.is_relative() && !base_dir.empty()) file = base_dir / file;
    cfg.topology.file = file.string();
  }
  if (cfg.topology.kind == TopologyKind::Custom) {
    if (cfg.topology.file.empty()) invalid("custom topology needs topology.file");
    try {
      cfg.topology.n = load_topology_file(cfg.topology.file).size();
    } catch (const Error& e) {
      invalid(std::string("custom topology: ") + e.what());
    }
  }

  const auto ds = root["dataset"];
  check_keys(ds, "dataset", {"kind", "samples", "classes", "dim", "spread", "anomalies", "test_fraction"});
  const auto ds_kind = get<std::string>(ds, "kind", "blobs", "dataset");
  if (ds_kind == "blobs")
    cfg.dataset.kind = DatasetKind::Blobs;
  else if (ds_kind == "anomaly")
    cfg.dataset.kind = DatasetKind::Anomaly;
  else
    invalid("unknown dataset kind '" + ds_kind + "'");
  const bool anomaly = cfg.dataset.kind == DatasetKind::Anomaly;
  cfg.dataset.samples = get<std::size_t>(ds, "samples", anomaly ? 800 : 600, "dataset");
  cfg.dataset.classes = anomaly ? 2 : get<std::size_t>(ds, "classes", 3, "dataset");
  cfg.dataset.dim = get<std::size_t>(ds, "dim", anomaly ? 8 : 4, "dataset");
  cfg.dataset.spread = get<double>(ds, "spread", 0.6, "dataset");
  cfg.dataset.anomalies = get<std::size_t>(ds, "anomalies", anomaly ? cfg.dataset.samples / 4 : 0, "dataset");
  cfg.test_fraction = get<double>(ds, "test_fraction", 0.2, "dataset");

  const auto tr = root["trainer"];
  check_keys(tr, "trainer", {"kind", "hidden", "alpha", "lambda", "batch_size"});
  cfg.trainer.kind = parse_trainer_kind(get<std::string>(tr, "kind", "logistic", "trainer"));
  cfg.trainer.hidden = get<std::size_t>(tr, "hidden", cfg.trainer.kind == TrainerKind::Autoencoder ? 3 : 8, "trainer");
  cfg.training.alpha = get<double>(tr, "alpha", 0.1, "trainer");
  cfg.training.lambda = get<double>(tr, "lambda", 0.0, "trainer");
  cfg.training.batch_size = get<std::size_t>(tr, "batch_size", 32, "trainer");

  if (const auto agg = root["aggregator"]) {
    if (agg.IsScalar()) {
      cfg.aggregator.kind = parse_aggregator(agg.as<std::string>());
    } else {
      check_keys(agg, "aggregator", {"name", "f", "k_trim"});
      cfg.aggregator.kind = parse_aggregator(get<std::string>(agg, "name", "fedavg", "aggregator"));
      cfg.aggregator.f = get<std::size_t>(agg, "f", 0, "aggregator");
      cfg.aggregator.k_trim = get<std::size_t>(agg, "k_trim", 0, "aggregator");
    }
  }

  if (const auto part = root["partition"]) {
    if (part.IsScalar()) {
      cfg.partition.noniid = part.as<std::string>() == "noniid";
      if (!cfg.partition.noniid && part.as<std::string>() != "iid") invalid("partition must be iid or noniid");
    } else {
      check_keys(part, "partition", {"kind", "shards_per_client"});
      const auto kind = get<std::string>(part, "kind", "iid", "partition");
      if (kind != "iid" && kind != "noniid") invalid("partition.kind must be iid or noniid");
      cfg.partition.noniid = kind == "noniid";
      cfg.partition.shards_per_client = get<std::size_t>(part, "shards_per_client", 2, "partition");
    }
  }

  cfg.training.rounds = get<std::size_t>(root, "rounds", 10, "");
  cfg.training.epochs = get<std::size_t>(root, "epochs", 20, "");
  cfg.round_timeout_s = get<double>(root, "round_timeout_s", 30.0, "");
  cfg.monitor_period_s = get<double>(root, "monitor_period_s", 5.0, "");
  cfg.heartbeat_period_s = get<double>(root, "heartbeat_period_s", 2.0, "");
  cfg.f1_target = get<double>(root, "f1_target", 0.9, "");

  if (const auto tp = root["transport"]) {
    std::string kind;
    if (tp.IsScalar()) {
      kind = tp.as<std::string>();
    } else {
      check_keys(tp, "transport", {"kind", "base_port", "host"});
      kind = get<std::string>(tp, "kind", "inproc", "transport");
      cfg.transport.base_port = get<std::uint16_t>(tp, "base_port", 47000, "transport");
      cfg.transport.host = get<std::string>(tp, "host", "127.0.0.1", "transport");
    }
    if (kind == "inproc")
      cfg.transport.kind = TransportKind::Inproc;
    else if (kind == "tcp")
      cfg.transport.kind = TransportKind::Tcp;
    else
      invalid("transport must be inproc or tcp");
  }

  if (const auto sched = root["schedule"]) {
    try {
      cfg.schedule = sched.as<std::vector<NodeId>>();
    } catch (const YAML::Exception&) {
      invalid("schedule must be a list of node ids");
    }
  }
  if (const auto faults = root["faults"]) {
    if (!faults.IsSequence()) invalid("faults must be a list");
    for (const auto& f : faults) {
      check_keys(f, "faults[]", {"node", "round"});
      if (!f["node"] || !f["round"]) invalid("each fault needs node and round");
      cfg.faults.push_back({get<NodeId>(f, "node", 0, "faults[]"), get<std::uint32_t>(f, "round", 0, "faults[]")});
    }
  }
  cfg.trainer.dim = cfg.dataset.dim;
  cfg.trainer.classes = cfg.dataset.classes;
  validate_scenario(cfg);
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.parent_path());
}

Topology build_topology(const ScenarioConfig& cfg) {
  const auto& t = cfg.topology;
  switch (t.kind) {
    case TopologyKind::FullyConnected: return Topology::fully_connected(t.n);
    case TopologyKind::Star: return Topology::star(t.n, t.center);
    case TopologyKind::Ring: return Topology::ring(t.n);
    case TopologyKind::Random: return Topology::random_connected(t.n, t.p, t.seed.value_or(cfg.seed));
    case TopologyKind::Custom: return load_topology_file(t.file);
  }
  return Topology::fully_connected(t.n);
}

void validate_scenario(const ScenarioConfig& cfg) {
  const std::size_t n = cfg.n();
  if (cfg.name.empty()) invalid("name must not be empty");
  if (n == 0) invalid("topology.n must be at least 1");
  if (n > 1000) invalid("topology.n must be at most 1000");
  Topology topo;
  try {
    topo = build_topology(cfg);
  } catch (const Error& e) {
    invalid(std::string("topology: ") + e.what());
  }
  if (cfg.architecture == Architecture::CFL) {
    if (cfg.topology.kind != TopologyKind::Star)
      invalid("CFL requires a star topology centered on the server (got " + to_string(cfg.topology.kind) + ")");
  }
  if (cfg.architecture == Architecture::SDFL) {
    std::set<NodeId> seen;
    for (NodeId id : cfg.schedule) {
      if (id >= n) invalid("SDFL schedule entry " + std::to_string(id) + " is not a node id");
      if (!seen.insert(id).second) invalid("SDFL schedule repeats node " + std::to_string(id));
    }
  } else if (!cfg.schedule.empty()) {
    invalid("schedule is only meaningful for SDFL");
  }
  const auto& agg = cfg.aggregator;
  if (agg.kind == AggregatorKind::Krum && n < 2 * agg.f + 3)
    invalid("krum with f=" + std::to_string(agg.f) + " needs n >= 2f+3 = " + std::to_string(2 * agg.f + 3) +
            " (n=" + std::to_string(n) + ")");
  if (agg.kind == AggregatorKind::TrimmedMean && n <= 2 * agg.k_trim)
    invalid("trimmed_mean with k_trim=" + std::to_string(agg.k_trim) + " needs n > 2*k_trim (n=" +
            std::to_string(n) + ")");

  const bool anomaly = cfg.dataset.kind == DatasetKind::Anomaly;
  if (anomaly != (cfg.trainer.kind == TrainerKind::Autoencoder))
    invalid("the anomaly dataset goes with the autoencoder trainer and only with it");
  if (anomaly && (cfg.dataset.anomalies < 1 || cfg.dataset.samples < 20))
    invalid("anomaly dataset needs >= 20 normal rows and >= 1 anomaly");
  if (!anomaly && (cfg.dataset.classes < 2 || cfg.dataset.samples < cfg.dataset.classes))
    invalid("blobs need classes >= 2 and samples >= classes");
  if (cfg.dataset.dim < 1) invalid("dataset.dim must be at least 1");
  if (!(cfg.dataset.spread > 0.0)) invalid("dataset.spread must be positive");
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) invalid("dataset.test_fraction must be in (0, 1)");
  if (cfg.trainer.hidden < 1) invalid("trainer.hidden must be at least 1");
  try {
    cfg.training.validate();
  } catch (const Error& e) {
    invalid(std::string("trainer: ") + e.what());
  }
  if (!(cfg.round_timeout_s > 0.0)) invalid("round_timeout_s must be positive");
  if (!(cfg.monitor_period_s > 0.0)) invalid("monitor_period_s must be positive");
  if (!(cfg.heartbeat_period_s > 0.0)) invalid("heartbeat_period_s must be positive");
  if (!(cfg.f1_target >= 0.0 && cfg.f1_target <= 1.0)) invalid("f1_target must be in [0, 1]");
  if (cfg.partition.noniid && cfg.partition.shards_per_client < 1) invalid("shards_per_client must be >= 1");

  const std::size_t total = anomaly ? cfg.dataset.samples + cfg.dataset.anomalies : cfg.dataset.samples;
  const std::size_t train_rows = total - static_cast<std::size_t>(static_cast<double>(total) * cfg.test_fraction + 1e-9);
  const std::size_t participants = cfg.architecture == Architecture::CFL ? n - 1 : n;
  if (cfg.architecture == Architecture::CFL && n < 2) invalid("CFL needs a server and at least one trainer");
  const std::size_t pieces = cfg.partition.noniid ? participants * cfg.partition.shards_per_client : participants;
  if (pieces > train_rows)
    invalid("not enough training rows (" + std::to_string(train_rows) + ") for " + std::to_string(pieces) + " shards");

  for (const auto& f : cfg.faults) {
    if (f.node >= n) invalid("fault names unknown node " + std::to_string(f.node));
    if (f.round >= cfg.training.rounds) invalid("fault round " + std::to_string(f.round) + " is past the last round");
  }
  if (cfg.transport.kind == TransportKind::Tcp &&
      (cfg.transport.base_port == 0 || cfg.transport.base_port + n > 65535))
    invalid("transport.base_port must leave room for n ports below 65536");
}

}  // namespace meshfl
