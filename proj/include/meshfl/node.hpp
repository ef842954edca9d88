#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "meshfl/aggregation.hpp"
#include "meshfl/comms/messenger.hpp"
#include "meshfl/data.hpp"
#include "meshfl/learning.hpp"
#include "meshfl/monitoring.hpp"

namespace meshfl {

enum class Role { Trainer, Aggregator, Proxy, Server, Idle };
enum class Architecture { DFL, SDFL, CFL };
enum class Phase { Idle, Training, WaitingParams, Aggregating, Done };

std::string to_string(Role role);
std::string to_string(Architecture arch);
std::string to_string(Phase phase);
Role parse_role(std::string_view text);
Architecture parse_architecture(std::string_view text);

/// Idle->Training->WaitingParams->Aggregating->(Training|Done), plus abort to Idle.
bool is_legal_phase_transition(Phase from, Phase to);

struct NodeState {
  NodeId id = 0;
  Role role = Role::Trainer;
  Architecture architecture = Architecture::DFL;
  std::uint32_t round = 0;
  std::uint32_t rounds = 10;
  ParamVector params;
  std::map<NodeId, Vector> pending;                          // current round only
  std::map<std::uint32_t, std::map<NodeId, Vector>> future;  // rounds ahead of ours
  Phase phase = Phase::Idle;
  std::optional<NodeId> current_leader;
  std::map<std::uint32_t, NodeId> leadership;  // LEADERSHIP naming us, by round
  std::map<std::uint32_t, NodeId> aggregated;  // MODELS_AGGREGATED sender, by round
  std::set<NodeId> flagged;                    // sent malformed parameters
  std::set<NodeId> ready;                      // MODELS_READY seen this round
  bool started = false;
  bool shutdown = false;
  std::optional<StartPayload> start;

  /// Moves to `to`; throws InvalidScenario on an illegal edge.
  void transition(Phase to);
  /// r -> r + 1: clears pending and promotes buffered future PARAMS.
  void advance_round();
};

enum class HandleResult {
  Stored,        // PARAMS for this round
  Buffered,      // PARAMS for a later round
  DroppedStale,  // PARAMS for an earlier round
  DroppedShape,  // PARAMS of the wrong length; sender flagged
  Started,
  StartRejected,  // START_LEARNING while already running
  Ready,
  Aggregated,
  Leadership,
  RoleChanged,
  Aborted,
  Shutdown,
  Ignored,
};

std::string to_string(HandleResult result);

/// Applies one delivered message to the node's protocol state.
HandleResult handle_message(NodeState& state, const Message& msg);

/// Next leader after `current` in `schedule`, skipping dead entries. Returns
/// `current` when every other entry is dead.
NodeId sdfl_rotate(const std::vector<NodeId>& schedule, NodeId current,
                   const std::function<bool(NodeId)>& is_dead);

/// Buffers downstream PARAMS for one round and releases them upstream as a
/// batch once all expected senders reported or the relay timeout passed.
class ProxyRelay {
 public:
  ProxyRelay(std::set<NodeId> expected, Duration relay_timeout, TimePoint start);

  /// Messages to forward now (unchanged, original sender and id).
  std::vector<Message> on_params(const Message& msg, TimePoint now);
  std::vector<Message> on_tick(TimePoint now);
  TimePoint deadline() const { return deadline_; }
  bool flushed() const { return flushed_; }

 private:
  std::vector<Message> release();

  std::set<NodeId> expected_;
  TimePoint deadline_;
  std::map<NodeId, Message> buffered_;
  bool flushed_ = false;
};

struct RoundOutcome {
  std::uint32_t round = 0;
  Vector aggregated;
  std::set<NodeId> contributors;
  std::chrono::milliseconds elapsed{0};
  bool timed_out = false;
  bool aborted = false;  // nothing to aggregate (CFL server with no trainer)
  std::optional<NodeId> aggregator;
  std::optional<EvalMetrics> eval;  // absent when the node cannot evaluate (proxy)
};

enum class TransportKind { Inproc, Tcp };

struct NodeConfig {
  NodeId id = 0;
  Role role = Role::Trainer;
  Architecture architecture = Architecture::DFL;
  std::size_t federation_size = 1;
  std::vector<NodeId> neighbors;
  std::map<NodeId, std::string> addresses;
  std::vector<NodeId> schedule;     // SDFL
  std::optional<NodeId> server;     // CFL
  std::optional<NodeId> upstream;   // proxy
  std::vector<NodeId> expected;     // CFL server / proxy: trainers to wait for

  TrainerSpec trainer;
  TrainingConfig training;
  AggregatorSpec aggregator;

  DatasetSpec dataset;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  std::vector<std::size_t> shard;  // indices into the train split

  std::uint64_t init_seed = 0;   // same on every node
  std::uint64_t train_seed = 0;  // per node

  double round_timeout_s = 30.0;
  double heartbeat_period_s = 2.0;
  std::size_t suspect_after = 3;
  std::size_t dead_after = 5;
  double monitor_period_s = 5.0;
  std::uint8_t flood_ttl = 1;
  std::string log_dir;  // empty: no log file
  std::optional<std::uint32_t> fail_at_round;

  TransportKind transport = TransportKind::Inproc;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  HeartbeatPolicy heartbeat() const;
};

std::string to_json(const NodeConfig& cfg);
NodeConfig node_config_from_json(const std::string& text);

/// Training and test data for one node, rebuilt from its config.
struct NodeData {
  Dataset train;  // this node's shard (autoencoder: normal rows only)
  Dataset test;   // shared test split
};
NodeData load_node_data(const NodeConfig& cfg);

/// Seed used for local training in round `round`.
std::uint64_t round_seed(const NodeConfig& cfg, std::uint32_t round);

/// A running participant: protocol state driven by one thread, fed by the
/// messenger through an event inbox.
class Node {
 public:
  Node(NodeConfig cfg, std::unique_ptr<Transport> transport, TimePoint epoch);
  ~Node();
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  /// Builds data and model, binds the transport and starts the node thread.
  std::string start();
  void connect(NodeId peer, const std::string& address, bool topology = true);
  /// Floods START_LEARNING (the initiator only).
  void start_federation();
  /// Floods STOP_LEARNING or STOP.
  void broadcast(MsgType type);

  /// True once the node finished all rounds, died or shut down.
  bool wait_finished(TimePoint deadline);
  /// Graceful: flush outgoing frames, stop threads.
  void stop();
  /// Abrupt crash: no more frames, no more beats.
  void kill();

  NodeId id() const { return cfg_.id; }
  const NodeConfig& config() const { return cfg_; }
  Messenger& messenger() { return *messenger_; }
  Phase phase() const;
  Role role() const;
  std::uint32_t round() const;
  ParamVector params() const;
  std::vector<RoundOutcome> outcomes() const;
  std::optional<EvalMetrics> last_eval() const;
  bool completed() const;
  bool killed() const;
  std::optional<TimePoint> killed_at() const;
  std::optional<std::string> failure() const;
  std::vector<MetricRecord> records() const { return metrics_.records(); }
  const NodeLogger& logger() const { return *logger_; }

 private:
  struct Event {
    enum class Kind { Delivered, Link, Wake } kind = Kind::Wake;
    Message msg;
    NodeId peer = 0;
    LinkState state = LinkState::Alive;
  };

  void run();
  void run_rounds();
  void run_proxy();
  RoundOutcome dfl_round();
  RoundOutcome sdfl_round();
  RoundOutcome cfl_server_round();
  RoundOutcome cfl_trainer_round();
  ParamVector train_step();
  void evaluate_into(RoundOutcome& outcome);
  void finish_round(RoundOutcome outcome);
  void set_phase(Phase to);

  /// Processes inbox events until `done()` holds or `deadline` passes.
  bool wait_until(const std::function<bool()>& done, TimePoint deadline, bool stop_on_interrupt = true);
  void apply(const Event& ev);
  void push(Event ev);
  bool is_dead(NodeId peer) const;
  bool interrupted() const;
  void proxy_params(const Message& msg, NodeId from);
  void forward_upstream(const std::vector<Message>& batch);
  void send_direct(NodeId peer, const Message& msg);
  void die();
  void sample_metrics();
  std::vector<std::uint8_t> contributor_payload(const std::set<NodeId>& ids) const;

  NodeConfig cfg_;
  TimePoint epoch_;
  std::unique_ptr<Messenger> messenger_;
  std::unique_ptr<NodeLogger> logger_;
  std::unique_ptr<Trainer> trainer_;
  NodeData data_;
  AnomalyModel anomaly_;
  MetricsBuffer metrics_;
  ResourceProbe probe_;
  std::unique_ptr<PeriodicTask> sampler_;
  bool resources_warned_ = false;

  std::optional<ProxyRelay> relay_;
  bool relay_got_server_ = false;
  std::set<NodeId> relayed_;

  mutable std::mutex inbox_mu_;
  std::condition_variable inbox_cv_;
  std::deque<Event> inbox_;
  bool halt_ = false;

  mutable std::mutex state_mu_;  // guards everything observers read
  NodeState state_;
  std::vector<RoundOutcome> outcomes_;
  std::optional<EvalMetrics> last_eval_;
  std::uint64_t sync_count_ = 0;
  bool finished_ = false;
  bool completed_ = false;
  bool killed_ = false;
  std::optional<TimePoint> killed_at_;
  std::optional<std::string> failure_;
  std::condition_variable finished_cv_;

  std::thread thread_;
};

}  // namespace meshfl
