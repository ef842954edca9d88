// Runs the twelve acceptance criteria and prints one PASS/FAIL line each.
// Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "meshfl/aggregation.hpp"
#include "meshfl/comms/message.hpp"
#include "meshfl/comms/routing.hpp"
#include "meshfl/controller.hpp"
#include "meshfl/error.hpp"
#include "meshfl/learning.hpp"
#include "mesh_harness.hpp"
#include "oracles.hpp"

using namespace meshfl;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int number, const std::string& title, double limit_s, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= limit_s) {
    v.pass = false;
    v.detail += "; runtime over " + std::to_string(static_cast<int>(limit_s)) + " s";
  }
  failures += !v.pass;
  std::printf("%s  %2d  %-40s %7.2f s  %s\n", v.pass ? "PASS" : "FAIL", number, title.c_str(), secs,
              v.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double x) {
  std::ostringstream s;
  s << x;
  return s.str();
}

ScenarioConfig scenario(const std::string& body, std::uint64_t seed) {
  auto cfg = parse_scenario("name: acceptance\nheartbeat_period_s: 0.25\nmonitor_period_s: 1\n" + body);
  cfg.seed = seed;
  validate_scenario(cfg);
  return cfg;
}

double max_abs_diff(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Fewest rounds after which every node's F1 met `target`; rounds + 1 if never.
std::uint32_t rounds_to(const ScenarioReport& r, std::uint32_t rounds) {
  return r.rounds_to_threshold.value_or(rounds + 1);
}

Verdict aggregator_oracles() {
  std::mt19937_64 rng(1);
  double worst = 0;
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng() % 7, d = 1 + rng() % 5;
    const auto vs = oracle::random_vectors(rng, n, d);
    const std::vector<Vector> rest(vs.begin() + 1, vs.end());
    const std::size_t f = (n - 3) / 2, k = (n - 1) / 2;
    worst = std::max({worst, max_abs_diff(fedavg(vs[0], rest), oracle::mean(vs)),
                      max_abs_diff(krum(vs, f), vs[oracle::krum_index(vs, f)]),
                      max_abs_diff(trimmed_mean(vs, k), oracle::trimmed_mean(vs, k)),
                      max_abs_diff(median(vs), oracle::median(vs))});
    if (worst > 1e-12) ++mismatches;
  }
  const std::vector<Vector> four{{4.0}};
  const bool exact = fedavg(Vector{2.0}, four) == Vector{3.0};
  return {mismatches == 0 && exact,
          "400 comparisons, max |err| " + fmt(worst) + ", fedavg([2],[[4]]) " + (exact ? "= [3]" : "!= [3]")};
}

Verdict flood_reachability() {
  std::mt19937_64 rng(2);
  const std::vector<MsgType> forwarding{MsgType::StartLearning, MsgType::StopLearning, MsgType::Params,
                                        MsgType::Stop, MsgType::ModelsReady, MsgType::ModelsAggregated};
  const std::vector<MsgType> local{MsgType::Role, MsgType::Metrics, MsgType::Leadership};
  std::size_t checked = 0, bad = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 19;
    const double p = 0.15 + 0.5 * static_cast<double>(rng() % 1000) / 1000.0;
    const auto topo = Topology::random_connected(n, p, rng());
    harness::Mesh mesh(topo, trial);
    const auto origin = static_cast<NodeId>(rng() % n);
    std::vector<Message> far, near;
    for (auto t : forwarding) {
      far.push_back(mesh.node(origin).make(t, 0, static_cast<std::uint8_t>(n)));
      mesh.node(origin).flood(far.back());
    }
    for (auto t : local) {
      near.push_back(mesh.node(origin).make(t, 0, static_cast<std::uint8_t>(n)));
      mesh.node(origin).flood(near.back());
    }
    mesh.settle();
    for (NodeId i = 0; i < n; ++i) {
      for (const auto& m : far) {
        ++checked;
        bad += mesh.deliveries(i, m.id) != (i == origin ? 0u : 1u);
      }
      for (const auto& m : near) {
        ++checked;
        bad += mesh.deliveries(i, m.id) != (topo.adjacent(origin, i) ? 1u : 0u);
      }
    }
  }
  // BEAT and CONNECT_TO never enter the delivery path; their routing rule is checked directly.
  SeenSet seen;
  for (auto t : {MsgType::Beat, MsgType::ConnectTo}) {
    Message m;
    m.type = t;
    m.ttl = 9;
    m.id.bytes[0] = static_cast<std::uint8_t>(t);
    ++checked;
    bad += !on_receive(m, 1, seen, {1, 2, 3}).forward_to.empty();
  }
  return {bad == 0, std::to_string(checked) + " delivery counts over 50 topologies, " + std::to_string(bad) +
                        " wrong"};
}

Verdict codec() {
  std::mt19937_64 rng(3);
  int wrong = 0;
  for (int i = 0; i < 1000; ++i) {
    Message m;
    m.type = kAllMsgTypes[rng() % kAllMsgTypes.size()];
    m.ttl = static_cast<std::uint8_t>(rng());
    m.sender = static_cast<NodeId>(rng());
    m.round = static_cast<std::uint32_t>(rng());
    for (auto& b : m.id.bytes) b = static_cast<std::uint8_t>(rng());
    if (m.type == MsgType::Params) {
      std::vector<double> v(rng() % 100);
      for (auto& x : v) x = static_cast<float>(std::normal_distribution<double>(0, 5)(rng));
      m.payload = encode_params(v);
    } else {
      m.payload.resize(rng() % 128);
      for (auto& b : m.payload) b = static_cast<std::uint8_t>(rng());
    }
    wrong += !(decode(encode(m)) == m);
  }
  Message base;
  base.type = MsgType::Metrics;
  base.payload = {1, 2, 3};
  const auto frame = encode(base);
  auto expect = [&](std::vector<std::uint8_t> f, Errc code) {
    try {
      decode(f);
    } catch (const Error& e) {
      return e.code() == code;
    }
    return false;
  };
  auto bad_type = frame, bad_version = frame;
  bad_type[5] = 255;
  bad_version[4] = 2;
  const int malformed = expect({frame.begin(), frame.end() - 1}, Errc::Truncated) +
                        expect(bad_type, Errc::UnknownType) + expect(bad_version, Errc::VersionMismatch);
  return {wrong == 0 && malformed == 3, std::to_string(1000 - wrong) + "/1000 round trips, " +
                                             std::to_string(malformed) + "/3 malformed classes rejected"};
}

Verdict gradients() {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> N(0.0, 1.0);
  double worst = 0;
  for (auto kind : {TrainerKind::Logistic, TrainerKind::Mlp, TrainerKind::Autoencoder}) {
    TrainerSpec spec;
    spec.kind = kind;
    spec.dim = 6;
    spec.classes = 3;
    spec.hidden = 5;
    const auto trainer = make_trainer(spec);
    for (int point = 0; point < 10; ++point) {
      std::vector<double> theta(trainer->param_count()), x(spec.dim);
      for (auto& v : theta) v = 0.5 * N(rng);
      for (auto& v : x) v = N(rng);
      const std::size_t label = rng() % spec.classes;
      std::vector<double> g(theta.size(), 0.0);
      trainer->sample_loss(theta, x, label, g);
      const auto num = oracle::numeric_gradient(
          [&](const std::vector<double>& t) { return trainer->sample_loss(t, x, label, {}); }, theta);
      double diff = 0, na = 0, nn = 0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        diff += (g[i] - num[i]) * (g[i] - num[i]);
        na += g[i] * g[i];
        nn += num[i] * num[i];
      }
      worst = std::max(worst, std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12}));
    }
  }
  return {worst <= 1e-5, "30 points, worst relative gap " + fmt(worst)};
}

Verdict anomaly_convergence() {
  int ok = 0;
  std::string rounds;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto cfg = scenario(
        "architecture: dfl\ntopology: {kind: fully, n: 8}\ndataset: {kind: anomaly}\n"
        "trainer: {kind: autoencoder}\nrounds: 10\nround_timeout_s: 10\nf1_target: 0.85\n",
        seed);
    const auto report = run_scenario(cfg);
    const bool pass = report.complete && report.rounds_to_threshold.has_value();
    ok += pass;
    rounds += (rounds.empty() ? "" : ",") + (pass ? std::to_string(*report.rounds_to_threshold) : std::string("-"));
  }
  return {ok == 5, std::to_string(ok) + "/5 seeds with every node F1 >= 0.85; rounds needed [" + rounds + "]"};
}

Verdict architecture_ordering() {
  int ok = 0;
  std::string pairs;
  const std::string common =
      "dataset: {kind: blobs, samples: 800}\npartition: {kind: noniid, shards_per_client: 2}\n"
      "trainer: {kind: logistic}\nrounds: 20\nepochs: 2\nround_timeout_s: 10\nf1_target: 0.9\n";
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto dfl = run_scenario(scenario("architecture: dfl\ntopology: {kind: fully, n: 8}\n" + common, seed));
    const auto cfl = run_scenario(scenario("architecture: cfl\ntopology: {kind: star, n: 8}\n" + common, seed));
    const auto a = rounds_to(dfl, 20), b = rounds_to(cfl, 20);
    ok += a <= b;
    pairs += (pairs.empty() ? "" : " ") + std::to_string(a) + "/" + std::to_string(b);
  }
  return {ok >= 4, std::to_string(ok) + "/5 seeds DFL <= CFL; rounds dfl/cfl: " + pairs};
}

Verdict topology_traffic() {
  int fully_star = 0, star_ring = 0, balanced = 0;
  std::string sums;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::map<std::string, std::uint64_t> bytes;
    for (const char* kind : {"fully", "star", "ring"}) {
      const auto report = run_scenario(scenario(std::string("architecture: dfl\ntopology: {kind: ") + kind +
                                                    ", n: 8}\ndataset: {kind: blobs, samples: 800}\n"
                                                    "trainer: {kind: logistic}\nrounds: 5\nepochs: 2\n"
                                                    "round_timeout_s: 10\n",
                                                seed));
      bytes[kind] = report.total_bytes_sent();
      balanced += report.total_bytes_sent() == report.total_bytes_received();
    }
    fully_star += bytes["fully"] > bytes["star"];
    star_ring += bytes["star"] > bytes["ring"];
    if (seed == 1)
      sums = "seed 1 bytes fully/star/ring " + std::to_string(bytes["fully"]) + "/" + std::to_string(bytes["star"]) +
             "/" + std::to_string(bytes["ring"]);
  }
  return {fully_star == 5 && star_ring == 5 && balanced == 15,
          "fully>star " + std::to_string(fully_star) + "/5, star>ring " + std::to_string(star_ring) +
              "/5, sent==received " + std::to_string(balanced) + "/15; " + sums};
}

std::string sequence(const ScenarioReport& r) {
  std::string s;
  for (const auto& round : r.aggregators) {
    s += s.empty() ? "" : ",";
    if (round.size() == 1)
      s += std::to_string(round[0]);
    else
      s += "{" + std::to_string(round.size()) + " leaders}";
  }
  return s;
}

Verdict sdfl_leadership() {
  const std::string body =
      "architecture: sdfl\ntopology: {kind: fully, n: 5}\ndataset: {kind: blobs, samples: 500}\n"
      "trainer: {kind: logistic}\nrounds: 10\nepochs: 2\nround_timeout_s: 10\n";
  const auto clean = run_scenario(scenario(body, 1));
  std::vector<std::vector<NodeId>> expect_clean;
  for (NodeId r = 0; r < 10; ++r) expect_clean.push_back({static_cast<NodeId>(r % 5)});
  const bool clean_ok = clean.complete && clean.aggregators == expect_clean;

  const auto faulty = run_scenario(scenario(body + "faults: [{node: 3, round: 4}]\n", 1));
  const std::vector<std::vector<NodeId>> expect_fault{{0}, {1}, {2}, {3}, {4}, {0}, {1}, {2}, {4}, {0}};
  bool survivors = true;
  for (const auto& n : faulty.nodes)
    if (n.id != 3) survivors = survivors && n.complete && n.outcomes.size() == 10;
  const bool fault_ok = faulty.aggregators == expect_fault && survivors && faulty.nodes[3].killed;
  return {clean_ok && fault_ok, "clean [" + sequence(clean) + "], node 3 killed at round 4 [" + sequence(faulty) +
                                    "], survivors complete: " + (survivors ? "yes" : "no")};
}

Verdict cfl_correctness() {
  auto cfg = scenario(
      "architecture: cfl\ntopology: {kind: star, n: 5}\ndataset: {kind: blobs, samples: 500}\n"
      "trainer: {kind: logistic}\nrounds: 1\nepochs: 3\nround_timeout_s: 10\n",
      9);
  auto fed = Federation::deploy(cfg);
  const auto plan = fed->plan();
  const auto report = fed->await_completion();

  // Recompute each trainer's submission from its config, then average.
  std::vector<Vector> submitted;
  for (NodeId t = 1; t <= 4; ++t) {
    const auto& nc = plan.nodes[t];
    const auto data = load_node_data(nc);
    const auto trainer = make_trainer(nc.trainer);
    const auto local = train_local(*trainer, init_params(nc.trainer, nc.init_seed), data.train, nc.training,
                                   round_seed(nc, 0));
    submitted.push_back(to_wire_precision(local.values));
  }
  const auto expected = to_wire_precision(oracle::mean(submitted));
  int identical = 0, matches = 0;
  for (NodeId t = 1; t <= 4; ++t) {
    identical += report.nodes[t].final_params == report.nodes[1].final_params;
    matches += report.nodes[t].final_params == expected;
  }
  const bool contributors = report.nodes[0].outcomes.size() == 1 &&
                            report.nodes[0].outcomes[0].contributors == std::set<NodeId>{1, 2, 3, 4};
  return {identical == 4 && matches == 4 && contributors,
          std::to_string(identical) + "/4 trainers bit-identical, " + std::to_string(matches) +
              "/4 equal to the oracle mean (" + std::to_string(expected.size()) + " params)"};
}

Verdict fault_tolerance() {
  auto cfg = scenario(
      "architecture: dfl\ntopology: {kind: fully, n: 6}\ndataset: {kind: blobs, samples: 600}\n"
      "trainer: {kind: logistic}\nrounds: 5\nepochs: 2\nround_timeout_s: 10\nfaults: [{node: 3, round: 2}]\n",
      5);
  auto fed = Federation::deploy(cfg);
  const auto report = fed->await_completion();
  const auto killed_at = fed->node(3).killed_at();
  const auto period = std::chrono::duration<double>(cfg.heartbeat_period_s);
  double worst = INFINITY;
  bool detected = killed_at.has_value();
  if (detected) {
    worst = 0;
    for (NodeId i = 0; i < 6; ++i) {
      if (i == 3) continue;
      const auto dead = fed->node(i).messenger().dead_since(3);
      if (!dead) {
        detected = false;
        continue;
      }
      worst = std::max(worst, std::chrono::duration<double>(*dead - *killed_at) / period);
    }
  }
  bool survivors = true;
  for (const auto& n : report.nodes)
    if (n.id != 3) survivors = survivors && n.complete && n.outcomes.size() == 5;
  const bool flagged = report.incomplete_count() == 1 && !report.nodes[3].complete;
  return {detected && worst <= 5.0 && survivors && flagged,
          "Dead after " + fmt(worst) + " periods (limit 5), survivors complete: " + (survivors ? "yes" : "no") +
              ", incomplete nodes: " + std::to_string(report.incomplete_count())};
}

Verdict determinism() {
  const std::string body =
      "architecture: dfl\ntopology: {kind: ring, n: 5}\ndataset: {kind: blobs, samples: 500}\n"
      "trainer: {kind: mlp}\nrounds: 4\nepochs: 2\nround_timeout_s: 10\n";
  const auto a = run_scenario(scenario(body, 11));
  const auto b = run_scenario(scenario(body, 11));
  auto tcp_cfg = scenario(body, 11);
  tcp_cfg.transport.kind = TransportKind::Tcp;
  tcp_cfg.transport.base_port = static_cast<std::uint16_t>(20000 + std::random_device{}() % 40000);
  const auto c = run_scenario(tcp_cfg);
  int same_runs = 0, same_tcp = 0;
  bool timeouts = false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    same_runs += a.nodes[i].final_params == b.nodes[i].final_params &&
                 a.nodes[i].final_eval->f1 == b.nodes[i].final_eval->f1;
    same_tcp += a.nodes[i].final_params == c.nodes[i].final_params;
    for (const auto& o : c.nodes[i].outcomes) timeouts = timeouts || o.timed_out;
  }
  return {same_runs == 5 && same_tcp == 5 && !timeouts,
          "inproc repeat identical " + std::to_string(same_runs) + "/5, tcp identical " + std::to_string(same_tcp) +
              "/5, tcp timeouts fired: " + (timeouts ? "yes" : "no")};
}

Verdict anomaly_threshold() {
  std::vector<double> errors;
  for (int i = 1; i <= 100; ++i) errors.push_back(i);
  const auto model = fit_anomaly_threshold({}, errors);
  const double want = oracle::percentile(errors, 95);
  const bool value = model.threshold && std::abs(*model.threshold - want) < 1e-12;
  const bool cut = model.is_anomaly(2 * want) && !model.is_anomaly(want / 2) && !model.is_anomaly(want);
  return {value && cut, "threshold " + fmt(model.threshold.value_or(NAN)) + " vs oracle " + fmt(want) +
                            ", above/below classification " + (cut ? "correct" : "wrong")};
}

}  // namespace

int main() {
  criterion(1, "aggregator oracle equivalence", 5, aggregator_oracles);
  criterion(2, "flood reachability", 30, flood_reachability);
  criterion(3, "codec round trip and malformed frames", 5, codec);
  criterion(4, "gradient checks", 10, gradients);
  criterion(5, "anomaly convergence, 8-node DFL", 120, anomaly_convergence);
  criterion(6, "architecture ordering DFL vs CFL", 300, architecture_ordering);
  criterion(7, "topology traffic ordering", 300, topology_traffic);
  criterion(8, "SDFL leadership rotation", 120, sdfl_leadership);
  criterion(9, "CFL correctness", 60, cfl_correctness);
  criterion(10, "fault tolerance", 120, fault_tolerance);
  criterion(11, "determinism and transport equivalence", 180, determinism);
  criterion(12, "anomaly threshold", 1, anomaly_threshold);
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
