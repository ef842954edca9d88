#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "meshfl/error.hpp"
#include "meshfl/monitoring.hpp"

using namespace meshfl;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("meshfl_mon_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<MetricRecord> three_records() {
  return {{5, 0, MetricCategory::FederatedModel, "f1", 0.25},
          {10, 1, MetricCategory::Communications, "bytes_sent", 1234},
          {15, 2, MetricCategory::Resources, "cpu_pct", 1.0 / 3.0}};
}

}  // namespace

TEST(Monitoring, SampleContents) {
  NodeSnapshot snap;
  snap.node = 4;
  snap.round = 3;
  snap.comms.bytes_sent = 100;
  auto recs = sample(snap, 42);
  auto find = [&](const std::string& name) {
    return std::find_if(recs.begin(), recs.end(), [&](const auto& r) { return r.name == name; });
  };
  ASSERT_NE(find("round"), recs.end());
  EXPECT_EQ(find("round")->value, 3);
  ASSERT_NE(find("bytes_sent"), recs.end());
  EXPECT_EQ(find("bytes_sent")->category, MetricCategory::Communications);
  EXPECT_EQ(find("f1"), recs.end());
  EXPECT_EQ(find("cpu_pct"), recs.end());
  for (const auto& r : recs) {
    EXPECT_EQ(r.node, 4);
    EXPECT_EQ(r.timestamp_ms, 42);
    EXPECT_EQ(MetricRegistry::category_of(r.name), r.category);
  }
  snap.comms.bytes_sent = 150;
  auto later = sample(snap, 43);
  auto it = std::find_if(later.begin(), later.end(), [](const auto& r) { return r.name == "bytes_sent"; });
  EXPECT_GE(it->value, find("bytes_sent")->value);
}

TEST(Monitoring, CsvShape) {
  const auto csv = records_to_csv(three_records());
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "timestamp_ms,node,category,name,value");
  const auto empty = records_to_csv({});
  EXPECT_EQ(std::count(empty.begin(), empty.end(), '\n'), 1);
  EXPECT_EQ(records_from_csv(csv), three_records());
  EXPECT_THROW(records_from_csv("timestamp_ms,node,category,name,value\nx,y\n"), Error);
}

TEST(Monitoring, ExportImportRoundTrip) {
  const auto dir = scratch("rt");
  for (auto fmt : {ExportFormat::Json, ExportFormat::Csv}) {
    const auto path = dir / (fmt == ExportFormat::Json ? "m.json" : "m.csv");
    export_records(three_records(), fmt, path);
    EXPECT_EQ(import_records(path, fmt), three_records());
  }
  try {
    export_records(three_records(), ExportFormat::Csv, dir / "missing" / "deeper" / "m.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IoError);
  }
}

TEST(Monitoring, PeriodicTaskPeriod) {
  std::mutex mu;
  std::vector<Clock::time_point> ticks;
  {
    PeriodicTask task(50ms, [&] {
      std::lock_guard lock(mu);
      ticks.push_back(Clock::now());
    });
    std::this_thread::sleep_for(330ms);
    task.stop();
  }
  ASSERT_GE(ticks.size(), 4u);
  for (std::size_t i = 1; i < ticks.size(); ++i) {
    const auto gap = std::chrono::duration<double, std::milli>(ticks[i] - ticks[i - 1]).count();
    EXPECT_NEAR(gap, 50.0, 25.0);
  }
}

TEST(Monitoring, BufferTimestamps) {
  MetricsBuffer buf(Clock::now() - 100ms);
  buf.append_now({{0, 1, MetricCategory::FederatedModel, "round", 0}});
  const auto recs = buf.records();
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_GE(recs[0].timestamp_ms, 100);
}

TEST(Monitoring, ResourceProbe) {
  ResourceProbe probe;
  probe.read();
  volatile double x = 0;
  for (int i = 0; i < 2000000; ++i) x = x + i;
  const auto usage = probe.read();
  if (usage.cpu_pct) EXPECT_GE(*usage.cpu_pct, 0.0);
  if (usage.ram_pct) {
    EXPECT_GT(*usage.ram_pct, 0.0);
    EXPECT_LT(*usage.ram_pct, 100.0);
  }
}

TEST(Monitoring, NodeLoggerWritesFile) {
  const auto dir = scratch("log");
  {
    NodeLogger log(7, dir);
    log.info("phase Training -> WaitingParams (round 0)");
    log.warn("dropped stale PARAMS");
    log.flush();
    EXPECT_EQ(log.count(LogLevel::Info), 1u);
    EXPECT_EQ(log.count(LogLevel::Warn), 1u);
  }
  std::ifstream in(dir / "7.log");
  std::stringstream text;
  text << in.rdbuf();
  EXPECT_NE(text.str().find("info phase Training -> WaitingParams"), std::string::npos);
  EXPECT_NE(text.str().find("warning dropped stale PARAMS"), std::string::npos);
}

TEST(Monitoring, NodeLoggerSurvivesBadDirectory) {
  const auto dir = scratch("badlog");
  std::ofstream(dir / "file") << "x";
  NodeLogger log(3, dir / "file" / "sub");
  log.error("still running");
  EXPECT_EQ(log.count(LogLevel::Error), 1u);
}
