#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "meshfl/learning.hpp"
#include "meshfl/topology.hpp"

namespace spdlog {
class logger;
}

namespace meshfl {

enum class MetricCategory { FederatedModel, Resources, Communications };

std::string to_string(MetricCategory category);
MetricCategory parse_metric_category(std::string_view text);

struct MetricRecord {
  std::int64_t timestamp_ms = 0;  // since scenario start
  NodeId node = 0;
  MetricCategory category = MetricCategory::FederatedModel;
  std::string name;
  double value = 0.0;

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

/// Fixed name -> category map. Names are unique across categories.
class MetricRegistry {
 public:
  static const std::vector<std::pair<std::string_view, MetricCategory>>& entries();
  static std::optional<MetricCategory> category_of(std::string_view name);
};

struct ResourceUsage {
  std::optional<double> cpu_pct;
  std::optional<double> ram_pct;
};

/// Process-level CPU and memory probe backed by /proc. Missing sources stay empty.
class ResourceProbe {
 public:
  ResourceUsage read();

 private:
  std::optional<std::pair<double, double>> last_;  // (cpu seconds, wall seconds)
};

struct CommsStats {
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t msgs_sent = 0;
  std::uint64_t msgs_received = 0;
  std::size_t active_connections = 0;
  std::optional<double> send_latency_ms;  // mean enqueue -> flush since the previous read
};

/// Everything a sample needs from one node at one instant.
struct NodeSnapshot {
  NodeId node = 0;
  std::uint32_t round = 0;
  std::optional<EvalMetrics> eval;
  std::size_t model_size_bytes = 0;
  std::uint64_t sync_count = 0;
  CommsStats comms;
  ResourceUsage resources;
};

/// One record per registry metric whose source is available in `snap`.
std::vector<MetricRecord> sample(const NodeSnapshot& snap, std::int64_t timestamp_ms);

/// Records of the per-round FederatedModel group written when a round completes.
std::vector<MetricRecord> round_records(NodeId node, std::uint32_t round, const EvalMetrics& eval,
                                        std::int64_t timestamp_ms);

/// Single-producer record buffer; timestamps are taken under the lock so they
/// never decrease for a given node.
class MetricsBuffer {
 public:
  explicit MetricsBuffer(std::chrono::steady_clock::time_point epoch) : epoch_(epoch) {}

  std::int64_t now_ms() const;
  void append(std::vector<MetricRecord> records);
  /// Stamps every record with the current time before appending.
  void append_now(std::vector<MetricRecord> records);
  std::vector<MetricRecord> records() const;

 private:
  std::chrono::steady_clock::time_point epoch_;
  mutable std::mutex mu_;
  std::vector<MetricRecord> records_;
};

/// Calls `fn` every `period` on its own thread until destroyed or stopped.
class PeriodicTask {
 public:
  PeriodicTask(std::chrono::milliseconds period, std::function<void()> fn);
  ~PeriodicTask();
  PeriodicTask(const PeriodicTask&) = delete;
  PeriodicTask& operator=(const PeriodicTask&) = delete;
  void stop();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  bool stopping_ = false;
  std::thread worker_;
};

enum class ExportFormat { Csv, Json };

void export_records(const std::vector<MetricRecord>& records, ExportFormat format,
                    const std::filesystem::path& destination);
std::vector<MetricRecord> import_records(const std::filesystem::path& source, ExportFormat format);
std::string records_to_csv(const std::vector<MetricRecord>& records);
std::vector<MetricRecord> records_from_csv(const std::string& text);

enum class LogLevel { Debug, Info, Warn, Error };

/// Per-node log file `<dir>/<node>.log`. A sink that cannot be opened or
/// written degrades to a one-time stderr notice; logging never throws.
class NodeLogger {
 public:
  NodeLogger(NodeId node, const std::filesystem::path& dir);
  /// Logger that discards everything (unit tests, library use without a scenario dir).
  explicit NodeLogger(NodeId node);
  ~NodeLogger();

  void log(LogLevel level, std::string_view text);
  void debug(std::string_view text) { log(LogLevel::Debug, text); }
  void info(std::string_view text) { log(LogLevel::Info, text); }
  void warn(std::string_view text) { log(LogLevel::Warn, text); }
  void error(std::string_view text) { log(LogLevel::Error, text); }
  void flush();

  /// Lines logged so far at each level (counted even when the sink is unavailable).
  std::size_t count(LogLevel level) const;

 private:
  NodeId node_;
  std::shared_ptr<spdlog::logger> sink_;
  mutable std::mutex mu_;
  std::size_t counts_[4] = {0, 0, 0, 0};
};

}  // namespace meshfl
