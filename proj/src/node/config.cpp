#include <json.hpp>

#include "meshfl/error.hpp"
#include "meshfl/node.hpp"

namespace meshfl {

using nlohmann::json;

namespace {

std::string dataset_kind_name(DatasetKind kind) { return kind == DatasetKind::Anomaly ? "anomaly" : "blobs"; }

DatasetKind parse_dataset_kind(const std::string& text) {
  if (text == "blobs") return DatasetKind::Blobs;
  if (text == "anomaly") return DatasetKind::Anomaly;
  throw Error(Errc::InvalidScenario, "unknown dataset kind '" + text + "'");
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

HeartbeatPolicy NodeConfig::heartbeat() const {
  HeartbeatPolicy policy;
  policy.period = std::chrono::duration_cast<Duration>(std::chrono::duration<double>(heartbeat_period_s));
  policy.suspect_after = suspect_after;
  policy.dead_after = dead_after;
  return policy;
}

std::string to_json(const NodeConfig& cfg) {
  json addresses = json::object();
  for (const auto& [id, addr] : cfg.addresses) addresses[std::to_string(id)] = addr;
  json doc = {
      {"id", cfg.id},
      {"role", to_string(cfg.role)},
      {"architecture", to_string(cfg.architecture)},
      {"federation_size", cfg.federation_size},
      {"neighbors", cfg.neighbors},
      {"addresses", addresses},
      {"schedule", cfg.schedule},
      {"expected", cfg.expected},
      {"trainer",
       {{"kind", to_string(cfg.trainer.kind)},
        {"dim", cfg.trainer.dim},
        {"classes", cfg.trainer.classes},
        {"hidden", cfg.trainer.hidden}}},
      {"training",
       {{"epochs", cfg.training.epochs},
        {"alpha", cfg.training.alpha},
        {"lambda", cfg.training.lambda},
        {"rounds", cfg.training.rounds},
        {"batch_size", cfg.training.batch_size}}},
      {"aggregator",
       {{"name", to_string(cfg.aggregator.kind)}, {"f", cfg.aggregator.f}, {"k_trim", cfg.aggregator.k_trim}}},
      {"dataset",
       {{"kind", dataset_kind_name(cfg.dataset.kind)},
        {"samples", cfg.dataset.samples},
        {"classes", cfg.dataset.classes},
        {"dim", cfg.dataset.dim},
        {"spread", cfg.dataset.spread},
        {"anomalies", cfg.dataset.anomalies},
        {"seed", cfg.dataset.seed}}},
      {"test_fraction", cfg.test_fraction},
      {"split_seed", cfg.split_seed},
      {"shard", cfg.shard},
      {"init_seed", cfg.init_seed},
      {"train_seed", cfg.train_seed},
      {"round_timeout_s", cfg.round_timeout_s},
      {"heartbeat_period_s", cfg.heartbeat_period_s},
      {"suspect_after", cfg.suspect_after},
      {"dead_after", cfg.dead_after},
      {"monitor_period_s", cfg.monitor_period_s},
      {"flood_ttl", cfg.flood_ttl},
      {"log_dir", cfg.log_dir},
      {"transport", cfg.transport == TransportKind::Tcp ? "tcp" : "inproc"},
      {"host", cfg.host},
      {"port", cfg.port},
  };
  if (cfg.server) doc["server"] = *cfg.server;
  if (cfg.upstream) doc["upstream"] = *cfg.upstream;
  if (cfg.fail_at_round) doc["fail_at_round"] = *cfg.fail_at_round;
  return doc.dump(2);
}

NodeConfig node_config_from_json(const std::string& text) {
  NodeConfig cfg;
  try {
    const json doc = json::parse(text);
    cfg.id = doc.at("id").get<NodeId>();
    cfg.role = parse_role(doc.at("role").get<std::string>());
    cfg.architecture = parse_architecture(doc.at("architecture").get<std::string>());
    cfg.federation_size = doc.at("federation_size").get<std::size_t>();
    cfg.neighbors = doc.at("neighbors").get<std::vector<NodeId>>();
    for (const auto& [key, value] : doc.at("addresses").items())
      cfg.addresses[static_cast<NodeId>(std::stoul(key))] = value.get<std::string>();
    cfg.schedule = doc.at("schedule").get<std::vector<NodeId>>();
    cfg.expected = doc.at("expected").get<std::vector<NodeId>>();
    if (doc.contains("server")) cfg.server = doc["server"].get<NodeId>();
    if (doc.contains("upstream")) cfg.upstream = doc["upstream"].get<NodeId>();
    if (doc.contains("fail_at_round")) cfg.fail_at_round = doc["fail_at_round"].get<std::uint32_t>();

    const auto& t = doc.at("trainer");
    cfg.trainer.kind = parse_trainer_kind(t.at("kind").get<std::string>());
    cfg.trainer.dim = t.at("dim").get<std::size_t>();
    cfg.trainer.classes = t.at("classes").get<std::size_t>();
    cfg.trainer.hidden = t.at("hidden").get<std::size_t>();

    const auto& tr = doc.at("training");
    cfg.training.epochs = tr.at("epochs").get<std::size_t>();
    cfg.training.alpha = tr.at("alpha").get<double>();
    cfg.training.lambda = tr.at("lambda").get<double>();
    cfg.training.rounds = tr.at("rounds").get<std::size_t>();
    cfg.training.batch_size = tr.at("batch_size").get<std::size_t>();

    const auto& a = doc.at("aggregator");
    cfg.aggregator.kind = parse_aggregator(a.at("name").get<std::string>());
    cfg.aggregator.f = a.at("f").get<std::size_t>();
    cfg.aggregator.k_trim = a.at("k_trim").get<std::size_t>();

    const auto& d = doc.at("dataset");
    cfg.dataset.kind = parse_dataset_kind(d.at("kind").get<std::string>());
    cfg.dataset.samples = d.at("samples").get<std::size_t>();
    cfg.dataset.classes = d.at("classes").get<std::size_t>();
    cfg.dataset.dim = d.at("dim").get<std::size_t>();
    cfg.dataset.spread = d.at("spread").get<double>();
    cfg.dataset.anomalies = d.at("anomalies").get<std::size_t>();
    cfg.dataset.seed = d.at("seed").get<std::uint64_t>();

    cfg.test_fraction = doc.at("test_fraction").get<double>();
    cfg.split_seed = doc.at("split_seed").get<std::uint64_t>();
    cfg.shard = doc.at("shard").get<std::vector<std::size_t>>();
    cfg.init_seed = doc.at("init_seed").get<std::uint64_t>();
    cfg.train_seed = doc.at("train_seed").get<std::uint64_t>();
    cfg.round_timeout_s = doc.at("round_timeout_s").get<double>();
    cfg.heartbeat_period_s = doc.at("heartbeat_period_s").get<double>();
    cfg.suspect_after = doc.at("suspect_after").get<std::size_t>();
    cfg.dead_after = doc.at("dead_after").get<std::size_t>();
    cfg.monitor_period_s = doc.at("monitor_period_s").get<double>();
    cfg.flood_ttl = doc.at("flood_ttl").get<std::uint8_t>();
    cfg.log_dir = doc.at("log_dir").get<std::string>();
    cfg.transport = doc.at("transport").get<std::string>() == "tcp" ? TransportKind::Tcp : TransportKind::Inproc;
    cfg.host = doc.at("host").get<std::string>();
    cfg.port = doc.at("port").get<std::uint16_t>();
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("node config: ") + e.what());
  }
  return cfg;
}

NodeData load_node_data(const NodeConfig& cfg) {
  const Dataset all = build_dataset(cfg.dataset);
  const auto [train_idx, test_idx] = split_indices(all.rows(), cfg.test_fraction, cfg.split_seed);
  const Dataset train = all.subset(train_idx);
  NodeData data;
  data.test = all.subset(test_idx);
  for (auto i : cfg.shard)
    if (i >= train.rows()) throw Error(Errc::InvalidIndex, "shard index " + std::to_string(i) + " out of range");
  data.train = train.subset(cfg.shard);
  if (cfg.trainer.kind == TrainerKind::Autoencoder) {
    std::vector<std::size_t> normal;
    for (std::size_t i = 0; i < data.train.rows(); ++i)
      if (data.train.labels[i] == 0) normal.push_back(i);
    data.train = data.train.subset(normal);
  }
  return data;
}

std::uint64_t round_seed(const NodeConfig& cfg, std::uint32_t round) {
  return splitmix(cfg.train_seed ^ splitmix(round));
}

}  // namespace meshfl
