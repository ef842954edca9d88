#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace meshfl {

using NodeId = std::uint16_t;

enum class TopologyKind { FullyConnected, Star, Ring, Random, Custom };

std::string to_string(TopologyKind kind);

/// Undirected federation graph. Node identity is the row index.
///
/// Construction goes through the generators below, all of which validate
/// symmetry, an empty diagonal and connectivity. Instances are immutable.
class Topology {
 public:
  Topology() : Topology(0, TopologyKind::Custom) {}
  std::size_t size() const { return n_; }
  TopologyKind kind() const { return kind_; }
  bool adjacent(std::size_t i, std::size_t j) const { return adj_[i * n_ + j] != 0; }
  std::size_t edge_count() const;
  std::size_t degree(std::size_t i) const;

  /// Ascending neighbor indices of node `i`.
  std::vector<NodeId> neighbors(std::size_t i) const;

  bool is_connected() const;

  /// Longest shortest path (hop count) over all node pairs.
  std::size_t diameter() const;

  std::vector<std::vector<int>> matrix() const;

  friend bool operator==(const Topology& a, const Topology& b) {
    return a.n_ == b.n_ && a.adj_ == b.adj_;
  }

  static Topology fully_connected(std::size_t n);
  static Topology star(std::size_t n, std::size_t center);
  static Topology ring(std::size_t n);
  static Topology random_connected(std::size_t n, double p, std::uint64_t seed);
  static Topology from_custom(const std::vector<std::vector<int>>& adj);

 private:
  Topology(std::size_t n, TopologyKind kind) : n_(n), kind_(kind), adj_(n * n, 0) {}
  void link(std::size_t i, std::size_t j);
  std::vector<std::size_t> bfs_depths(std::size_t from) const;

  std::size_t n_;
  TopologyKind kind_;
  std::vector<std::uint8_t> adj_;
};

// Plain-text adjacency format: first line n, then n rows of space-separated 0/1.
std::string format_adjacency(const Topology& t);
Topology parse_adjacency(const std::string& text);
Topology load_topology_file(const std::filesystem::path& path);
void save_topology_file(const Topology& t, const std::filesystem::path& path);

}  // namespace meshfl
