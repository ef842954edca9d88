#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "meshfl/comms/transport.hpp"
#include "meshfl/data.hpp"
#include "meshfl/learning.hpp"
#include "meshfl/monitoring.hpp"
#include "meshfl/node.hpp"
#include "meshfl/topology.hpp"

namespace meshfl {

struct TopologySpec {
  TopologyKind kind = TopologyKind::FullyConnected;
  std::size_t n = 0;
  double p = 0.5;
  std::optional<std::uint64_t> seed;  // defaults to the scenario seed
  NodeId center = 0;
  std::string file;  // custom adjacency file
};

struct PartitionSpec {
  bool noniid = false;
  std::size_t shards_per_client = 2;
};

struct TransportSpec {
  TransportKind kind = TransportKind::Inproc;
  std::string host = "127.0.0.1";
  std::uint16_t base_port = 47000;
};

struct FaultSpec {
  NodeId node = 0;
  std::uint32_t round = 0;
};

struct ScenarioConfig {
  std::string name;
  Architecture architecture = Architecture::DFL;
  TopologySpec topology;
  DatasetSpec dataset;
  double test_fraction = 0.2;
  TrainerSpec trainer;
  TrainingConfig training;  // rounds and epochs live here
  AggregatorSpec aggregator;
  PartitionSpec partition;
  double round_timeout_s = 30.0;
  double monitor_period_s = 5.0;
  double heartbeat_period_s = 2.0;
  double f1_target = 0.9;
  TransportSpec transport;
  std::uint64_t seed = 0;
  std::vector<NodeId> schedule;  // SDFL; empty means ascending ids
  std::vector<FaultSpec> faults;

  std::size_t n() const { return topology.n; }
};

/// Parses a YAML scenario. Unknown keys throw UnknownField; values that break
/// an invariant throw InvalidScenario. Relative custom-topology paths resolve
/// against `base_dir`.
ScenarioConfig parse_scenario(const std::string& yaml_text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);
/// Throws InvalidScenario naming the first violated invariant.
void validate_scenario(const ScenarioConfig& cfg);
Topology build_topology(const ScenarioConfig& cfg);

struct DeploymentPlan {
  Topology topology;
  std::vector<NodeConfig> nodes;
};

/// Topology, data partition, roles and per-node config documents.
DeploymentPlan plan_deployment(const ScenarioConfig& cfg, const std::filesystem::path& log_dir = {});

struct NodeReport {
  NodeId id = 0;
  Role role = Role::Trainer;
  std::optional<EvalMetrics> final_eval;
  std::vector<RoundOutcome> outcomes;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  bool complete = false;
  bool killed = false;
  std::optional<std::string> failure;
  Vector final_params;
};

struct ScenarioReport {
  std::string name;
  Architecture architecture = Architecture::DFL;
  bool complete = false;
  double duration_s = 0.0;
  double f1_target = 0.9;
  std::optional<double> time_to_threshold_s;
  std::optional<std::uint32_t> rounds_to_threshold;
  std::vector<NodeReport> nodes;
  std::vector<std::vector<NodeId>> aggregators;  // per round: nodes that aggregated
  std::vector<MetricRecord> records;

  std::uint64_t total_bytes_sent() const;
  std::uint64_t total_bytes_received() const;
  std::size_t incomplete_count() const;
};

/// A deployed, running federation.
class Federation {
 public:
  /// Starts every node, links all topology edges, then floods START_LEARNING
  /// from node 0. Bind failures throw DeployFailed; links that do not come up
  /// throw StartFailed. Nodes started so far are torn down on failure.
  static std::unique_ptr<Federation> deploy(const ScenarioConfig& cfg,
                                            const std::filesystem::path& out_dir = {});
  ~Federation();

  /// Waits for every node (bounded by 3 * rounds * round_timeout), stops them
  /// and assembles the report.
  ScenarioReport await_completion();

  std::size_t size() const { return nodes_.size(); }
  Node& node(NodeId id) { return *nodes_.at(id); }
  const Topology& topology() const { return plan_.topology; }
  const DeploymentPlan& plan() const { return plan_; }
  TimePoint epoch() const { return epoch_; }
  void kill(NodeId id);

 private:
  Federation(ScenarioConfig cfg, DeploymentPlan plan);
  void teardown();

  ScenarioConfig cfg_;
  DeploymentPlan plan_;
  TimePoint epoch_;
  std::shared_ptr<InprocNetwork> network_;
  std::vector<std::unique_ptr<Node>> nodes_;
  bool stopped_ = false;
};

/// deploy + await_completion, then writes the artifacts when `out_dir` is set.
ScenarioReport run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir = {});

/// report.json, metrics.csv, metrics.json and summary.txt.
void write_artifacts(const ScenarioReport& report, const std::filesystem::path& out_dir);
std::string report_to_json(const ScenarioReport& report);
std::string summary_text(const ScenarioReport& report);

/// Earliest timestamp (ms) at which the latest f1 record of every node in
/// `nodes` is >= target.
std::optional<std::int64_t> time_to_threshold_ms(const std::vector<MetricRecord>& records,
                                                 const std::vector<NodeId>& nodes, double target);

/// Summary recomputed from exported records alone.
struct RecordSummary {
  std::vector<NodeId> nodes;
  std::map<NodeId, double> final_f1;
  std::map<NodeId, double> bytes_sent;
  std::map<NodeId, double> bytes_received;
  std::map<NodeId, double> rounds;
  std::optional<std::int64_t> time_to_threshold_ms;
};
RecordSummary summarize_records(const std::vector<MetricRecord>& records, double f1_target);
std::string summary_text(const RecordSummary& summary, double f1_target);

}  // namespace meshfl
