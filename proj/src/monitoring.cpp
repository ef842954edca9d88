#include "meshfl/monitoring.hpp"

#include <spdlog/logger.h>
#include <spdlog/sinks/basic_file_sink.h>
#include <unistd.h>

#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "meshfl/error.hpp"

namespace meshfl {

namespace {

using Cat = MetricCategory;

constexpr const char* kCsvHeader = "timestamp_ms,node,category,name,value";

MetricRecord record(NodeId node, std::string_view name, double value, std::int64_t ts) {
  return {ts, node, *MetricRegistry::category_of(name), std::string(name), value};
}

double wall_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string format_value(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::string to_string(MetricCategory category) {
  switch (category) {
    case Cat::FederatedModel: return "FederatedModel";
    case Cat::Resources: return "Resources";
    case Cat::Communications: return "Communications";
  }
  return "FederatedModel";
}

MetricCategory parse_metric_category(std::string_view text) {
  if (text == "FederatedModel") return Cat::FederatedModel;
  if (text == "Resources") return Cat::Resources;
  if (text == "Communications") return Cat::Communications;
  throw Error(Errc::ParseError, "unknown metric category '" + std::string(text) + "'");
}

const std::vector<std::pair<std::string_view, MetricCategory>>& MetricRegistry::entries() {
  static const std::vector<std::pair<std::string_view, MetricCategory>> table = {
      {"loss", Cat::FederatedModel},
      {"accuracy", Cat::FederatedModel},
      {"precision", Cat::FederatedModel},
      {"recall", Cat::FederatedModel},
      {"f1", Cat::FederatedModel},
      {"model_size_bytes", Cat::FederatedModel},
      {"sync_count", Cat::FederatedModel},
      {"round", Cat::FederatedModel},
      {"cpu_pct", Cat::Resources},
      {"ram_pct", Cat::Resources},
      {"bytes_sent", Cat::Communications},
      {"bytes_received", Cat::Communications},
      {"active_connections", Cat::Communications},
      {"send_latency_ms", Cat::Communications},
      {"msgs_sent", Cat::Communications},
      {"msgs_received", Cat::Communications},
  };
  return table;
}

std::optional<MetricCategory> MetricRegistry::category_of(std::string_view name) {
  for (const auto& [n, c] : entries())
    if (n == name) return c;
  return std::nullopt;
}

ResourceUsage ResourceProbe::read() {
  ResourceUsage usage;
  {
    std::ifstream stat("/proc/self/stat");
    std::string content;
    if (std::getline(stat, content)) {
      // Fields after the parenthesised command name; utime and stime are 14 and 15.
      const auto close = content.rfind(')');
      std::istringstream rest(content.substr(close + 2));
      std::string field;
      double utime = 0, stime = 0;
      for (int idx = 3; rest >> field; ++idx) {
        if (idx == 14) utime = std::stod(field);
        if (idx == 15) {
          stime = std::stod(field);
          break;
        }
      }
      const double ticks = static_cast<double>(sysconf(_SC_CLK_TCK));
      const double cpu = (utime + stime) / ticks;
      const double wall = wall_seconds();
      if (last_ && wall > last_->second)
        usage.cpu_pct = 100.0 * (cpu - last_->first) / (wall - last_->second);
      last_ = {cpu, wall};
    }
  }
  std::ifstream statm("/proc/self/statm");
  std::ifstream meminfo("/proc/meminfo");
  long pages = 0, resident = 0;
  std::string key;
  long total_kb = 0;
  if (statm >> pages >> resident && meminfo >> key >> total_kb && key == "MemTotal:" && total_kb > 0) {
    const double rss_kb = static_cast<double>(resident) * static_cast<double>(sysconf(_SC_PAGESIZE)) / 1024.0;
    usage.ram_pct = 100.0 * rss_kb / static_cast<double>(total_kb);
  }
  return usage;
}

std::vector<MetricRecord> sample(const NodeSnapshot& snap, std::int64_t ts) {
  std::vector<MetricRecord> out;
  const auto n = snap.node;
  if (snap.eval) {
    out.push_back(record(n, "loss", snap.eval->loss, ts));
    out.push_back(record(n, "accuracy", snap.eval->accuracy, ts));
    out.push_back(record(n, "precision", snap.eval->precision, ts));
    out.push_back(record(n, "recall", snap.eval->recall, ts));
    out.push_back(record(n, "f1", snap.eval->f1, ts));
  }
  out.push_back(record(n, "model_size_bytes", static_cast<double>(snap.model_size_bytes), ts));
  out.push_back(record(n, "sync_count", static_cast<double>(snap.sync_count), ts));
  out.push_back(record(n, "round", snap.round, ts));
  if (snap.resources.cpu_pct) out.push_back(record(n, "cpu_pct", *snap.resources.cpu_pct, ts));
  if (snap.resources.ram_pct) out.push_back(record(n, "ram_pct", *snap.resources.ram_pct, ts));
  out.push_back(record(n, "bytes_sent", static_cast<double>(snap.comms.bytes_sent), ts));
  out.push_back(record(n, "bytes_received", static_cast<double>(snap.comms.bytes_received), ts));
  out.push_back(record(n, "active_connections", static_cast<double>(snap.comms.active_connections), ts));
  if (snap.comms.send_latency_ms)
    out.push_back(record(n, "send_latency_ms", *snap.comms.send_latency_ms, ts));
  out.push_back(record(n, "msgs_sent", static_cast<double>(snap.comms.msgs_sent), ts));
  out.push_back(record(n, "msgs_received", static_cast<double>(snap.comms.msgs_received), ts));
  return out;
}

std::vector<MetricRecord> round_records(NodeId node, std::uint32_t round, const EvalMetrics& eval,
                                        std::int64_t ts) {
  return {record(node, "round", round, ts),         record(node, "loss", eval.loss, ts),
          record(node, "accuracy", eval.accuracy, ts), record(node, "precision", eval.precision, ts),
          record(node, "recall", eval.recall, ts),     record(node, "f1", eval.f1, ts)};
}

std::int64_t MetricsBuffer::now_ms() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - epoch_)
      .count();
}

void MetricsBuffer::append(std::vector<MetricRecord> records) {
  std::lock_guard lock(mu_);
  for (auto& r : records) records_.push_back(std::move(r));
}

void MetricsBuffer::append_now(std::vector<MetricRecord> records) {
  std::lock_guard lock(mu_);
  const auto ts = now_ms();
  for (auto& r : records) {
    r.timestamp_ms = ts;
    records_.push_back(std::move(r));
  }
}

std::vector<MetricRecord> MetricsBuffer::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

PeriodicTask::PeriodicTask(std::chrono::milliseconds period, std::function<void()> fn) {
  worker_ = std::thread([this, period, fn = std::move(fn)] {
    std::unique_lock lock(mu_);
    while (!stopping_) {
      if (cv_.wait_for(lock, period, [this] { return stopping_; })) break;
      lock.unlock();
      fn();
      lock.lock();
    }
  });
}

PeriodicTask::~PeriodicTask() { stop(); }

void PeriodicTask::stop() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

std::string records_to_csv(const std::vector<MetricRecord>& records) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : records)
    out << r.timestamp_ms << ',' << r.node << ',' << to_string(r.category) << ',' << r.name << ','
        << format_value(r.value) << '\n';
  return out.str();
}

std::vector<MetricRecord> records_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw Error(Errc::ParseError, std::string("CSV header must be '") + kCsvHeader + "'");
  std::vector<MetricRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string ts, node, cat, name, value;
    if (!std::getline(fields, ts, ',') || !std::getline(fields, node, ',') ||
        !std::getline(fields, cat, ',') || !std::getline(fields, name, ',') ||
        !std::getline(fields, value))
      throw Error(Errc::ParseError, "malformed row '" + line + "'");
    try {
      out.push_back({std::stoll(ts), static_cast<NodeId>(std::stoul(node)), parse_metric_category(cat),
                     name, std::stod(value)});
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, "malformed row '" + line + "'");
    }
  }
  return out;
}

void export_records(const std::vector<MetricRecord>& records, ExportFormat format,
                    const std::filesystem::path& destination) {
  for (const auto& r : records)
    if (!std::isfinite(r.value)) throw Error(Errc::IoError, "non-finite value for " + r.name);
  std::ofstream out(destination);
  if (!out) throw Error(Errc::IoError, "cannot write " + destination.string());
  if (format == ExportFormat::Csv) {
    out << records_to_csv(records);
  } else {
    auto doc = nlohmann::json::array();
    for (const auto& r : records)
      doc.push_back({{"timestamp_ms", r.timestamp_ms},
                     {"node", r.node},
                     {"category", to_string(r.category)},
                     {"name", r.name},
                     {"value", r.value}});
    out << doc.dump(1) << '\n';
  }
  if (!out) throw Error(Errc::IoError, "write failed for " + destination.string());
}

std::vector<MetricRecord> import_records(const std::filesystem::path& source, ExportFormat format) {
  std::ifstream in(source);
  if (!in) throw Error(Errc::IoError, "cannot read " + source.string());
  std::stringstream buf;
  buf << in.rdbuf();
  if (format == ExportFormat::Csv) return records_from_csv(buf.str());
  std::vector<MetricRecord> out;
  try {
    for (const auto& item : nlohmann::json::parse(buf.str()))
      out.push_back({item.at("timestamp_ms").get<std::int64_t>(), item.at("node").get<NodeId>(),
                     parse_metric_category(item.at("category").get<std::string>()),
                     item.at("name").get<std::string>(), item.at("value").get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
  return out;
}

NodeLogger::NodeLogger(NodeId node) : node_(node) {}

NodeLogger::NodeLogger(NodeId node, const std::filesystem::path& dir) : node_(node) {
  const auto path = dir / (std::to_string(node) + ".log");
  try {
    auto file = std::make_shared<spdlog::sinks::basic_file_sink_mt>(path.string(), true);
    sink_ = std::make_shared<spdlog::logger>("node" + std::to_string(node), std::move(file));
    sink_->set_pattern("%Y-%m-%dT%H:%M:%S.%e %l %v");
    sink_->set_level(spdlog::level::debug);
    sink_->flush_on(spdlog::level::warn);
  } catch (const std::exception& e) {
    std::cerr << "node " << node << ": cannot open log " << path << " (" << e.what()
              << "); continuing without a log file\n";
  }
}

NodeLogger::~NodeLogger() { flush(); }

void NodeLogger::log(LogLevel level, std::string_view text) {
  {
    std::lock_guard lock(mu_);
    ++counts_[static_cast<int>(level)];
  }
  if (!sink_) return;
  try {
    switch (level) {
      case LogLevel::Debug: sink_->debug(text); break;
      case LogLevel::Info: sink_->info(text); break;
      case LogLevel::Warn: sink_->warn(text); break;
      case LogLevel::Error: sink_->error(text); break;
    }
  } catch (...) {
    // spdlog reports sink failures through its own error handler.
  }
}

void NodeLogger::flush() {
  if (sink_) {
    try {
      sink_->flush();
    } catch (...) {
    }
  }
}

std::size_t NodeLogger::count(LogLevel level) const {
  std::lock_guard lock(mu_);
  return counts_[static_cast<int>(level)];
}

}  // namespace meshfl
