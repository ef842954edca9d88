#include "meshfl/topology.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <queue>
#include <random>
#include <sstream>

#include "meshfl/error.hpp"

namespace meshfl {

namespace {

constexpr int kMaxRandomAttempts = 100;
constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();

}  // namespace

std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::FullyConnected: return "fully";
    case TopologyKind::Star: return "star";
    case TopologyKind::Ring: return "ring";
    case TopologyKind::Random: return "random";
    case TopologyKind::Custom: return "custom";
  }
  return "custom";
}

void Topology::link(std::size_t i, std::size_t j) {
  adj_[i * n_ + j] = 1;
  adj_[j * n_ + i] = 1;
}

std::size_t Topology::edge_count() const {
  std::size_t twice = 0;
  for (auto v : adj_) twice += v;
  return twice / 2;
}

std::size_t Topology::degree(std::size_t i) const {
  if (i >= n_) throw Error(Errc::InvalidIndex, "node " + std::to_string(i));
  std::size_t d = 0;
  for (std::size_t j = 0; j < n_; ++j) d += adj_[i * n_ + j];
  return d;
}

std::vector<NodeId> Topology::neighbors(std::size_t i) const {
  if (i >= n_) throw Error(Errc::InvalidIndex, "node " + std::to_string(i));
  std::vector<NodeId> out;
  for (std::size_t j = 0; j < n_; ++j)
    if (adj_[i * n_ + j]) out.push_back(static_cast<NodeId>(j));
  return out;
}

std::vector<std::size_t> Topology::bfs_depths(std::size_t from) const {
  std::vector<std::size_t> depth(n_, kUnreached);
  std::queue<std::size_t> frontier;
  depth[from] = 0;
  frontier.push(from);
  while (!frontier.empty()) {
    auto u = frontier.front();
    frontier.pop();
    for (std::size_t v = 0; v < n_; ++v) {
      if (adj_[u * n_ + v] && depth[v] == kUnreached) {
        depth[v] = depth[u] + 1;
        frontier.push(v);
      }
    }
  }
  return depth;
}

bool Topology::is_connected() const {
  if (n_ == 0) return false;
  auto depth = bfs_depths(0);
  return std::none_of(depth.begin(), depth.end(), [](auto d) { return d == kUnreached; });
}

std::size_t Topology::diameter() const {
  std::size_t best = 0;
  for (std::size_t s = 0; s < n_; ++s) {
    for (auto d : bfs_depths(s)) {
      if (d == kUnreached) return kUnreached;
      best = std::max(best, d);
    }
  }
  return best;
}

std::vector<std::vector<int>> Topology::matrix() const {
  std::vector<std::vector<int>> m(n_, std::vector<int>(n_, 0));
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) m[i][j] = adj_[i * n_ + j];
  return m;
}

Topology Topology::fully_connected(std::size_t n) {
  if (n == 0) throw Error(Errc::InvalidSize, "fully connected topology needs n >= 1");
  Topology t(n, TopologyKind::FullyConnected);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) t.link(i, j);
  return t;
}

Topology Topology::star(std::size_t n, std::size_t center) {
  if (n < 2) throw Error(Errc::InvalidSize, "star topology needs n >= 2");
  if (center >= n) throw Error(Errc::InvalidIndex, "star center " + std::to_string(center));
  Topology t(n, TopologyKind::Star);
  for (std::size_t i = 0; i < n; ++i)
    if (i != center) t.link(center, i);
  return t;
}

Topology Topology::ring(std::size_t n) {
  // A 2-ring would just repeat the single edge.
  if (n < 3) throw Error(Errc::InvalidSize, "ring topology needs n >= 3");
  Topology t(n, TopologyKind::Ring);
  for (std::size_t i = 0; i < n; ++i) t.link(i, (i + 1) % n);
  return t;
}

Topology Topology::random_connected(std::size_t n, double p, std::uint64_t seed) {
  if (n < 2) throw Error(Errc::InvalidSize, "random topology needs n >= 2");
  if (!(p > 0.0 && p <= 1.0)) throw Error(Errc::InvalidSize, "edge probability must be in (0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int attempt = 0; attempt < kMaxRandomAttempts; ++attempt) {
    Topology t(n, TopologyKind::Random);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (coin(rng) < p) t.link(i, j);
    if (t.is_connected()) return t;
  }
  throw Error(Errc::GenerationFailed, "no connected G(n,p) sample in " +
                                          std::to_string(kMaxRandomAttempts) +
                                          " attempts; p is too small for n");
}

Topology Topology::from_custom(const std::vector<std::vector<int>>& adj) {
  const auto n = adj.size();
  if (n == 0) throw Error(Errc::InvalidSize, "empty adjacency matrix");
  Topology t(n, TopologyKind::Custom);
  for (std::size_t i = 0; i < n; ++i) {
    if (adj[i].size() != n) throw Error(Errc::InvalidSize, "adjacency matrix is not square");
    for (std::size_t j = 0; j < n; ++j) {
      const int v = adj[i][j];
      if (v != 0 && v != 1) throw Error(Errc::InvalidSize, "adjacency entries must be 0 or 1");
      t.adj_[i * n + j] = static_cast<std::uint8_t>(v);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (t.adj_[i * n + i]) throw Error(Errc::SelfLoop, "node " + std::to_string(i));
    for (std::size_t j = i + 1; j < n; ++j)
      if (t.adj_[i * n + j] != t.adj_[j * n + i])
        throw Error(Errc::NotSymmetric,
                    "entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
  }
  // An isolated node could never federate.
  if (!t.is_connected()) throw Error(Errc::Disconnected, "graph has more than one component");
  return t;
}

std::string format_adjacency(const Topology& t) {
  std::ostringstream out;
  out << t.size() << '\n';
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (j) out << ' ';
      out << (t.adjacent(i, j) ? 1 : 0);
    }
    out << '\n';
  }
  return out.str();
}

Topology parse_adjacency(const std::string& text) {
  std::istringstream in(text);
  long long n = 0;
  if (!(in >> n) || n <= 0) throw Error(Errc::ParseError, "first line must be a positive node count");
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n)));
  for (auto& row : adj)
    for (auto& v : row)
      if (!(in >> v)) throw Error(Errc::ParseError, "expected " + std::to_string(n * n) + " matrix entries");
  std::string extra;
  if (in >> extra) throw Error(Errc::ParseError, "trailing data after matrix");
  return Topology::from_custom(adj);
}

Topology load_topology_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_adjacency(buf.str());
}

void save_topology_file(const Topology& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << format_adjacency(t);
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

}  // namespace meshfl
