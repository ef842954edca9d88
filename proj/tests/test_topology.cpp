#include <gtest/gtest.h>

#include <filesystem>

#include "meshfl/error.hpp"
#include "meshfl/topology.hpp"
#include "oracles.hpp"

using namespace meshfl;

namespace {

template <typename F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::IoError;
}

std::vector<std::size_t> degrees(const Topology& t) {
  std::vector<std::size_t> d;
  for (std::size_t i = 0; i < t.size(); ++i) d.push_back(t.degree(i));
  return d;
}

}  // namespace

TEST(Topology, FullyConnected) {
  auto t3 = Topology::fully_connected(3);
  EXPECT_EQ(t3.edge_count(), 3u);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(t3.adjacent(i, j), i != j);
  auto t1 = Topology::fully_connected(1);
  EXPECT_EQ(t1.edge_count(), 0u);
  EXPECT_EQ(t1.matrix(), (std::vector<std::vector<int>>{{0}}));
  EXPECT_EQ(Topology::fully_connected(8).edge_count(), 28u);
  EXPECT_EQ(code_of([] { Topology::fully_connected(0); }), Errc::InvalidSize);
}

TEST(Topology, Star) {
  auto s = Topology::star(4, 0);
  EXPECT_EQ(s.edge_count(), 3u);
  EXPECT_TRUE(s.adjacent(0, 1) && s.adjacent(0, 2) && s.adjacent(0, 3));
  EXPECT_FALSE(s.adjacent(1, 2));
  auto s2 = Topology::star(2, 1);
  EXPECT_EQ(s2.edge_count(), 1u);
  EXPECT_TRUE(s2.adjacent(0, 1));
  std::vector<std::size_t> expected(20, 1);
  expected[0] = 19;
  EXPECT_EQ(degrees(Topology::star(20, 0)), expected);
  EXPECT_EQ(code_of([] { Topology::star(4, 4); }), Errc::InvalidIndex);
}

TEST(Topology, Ring) {
  auto r = Topology::ring(5);
  EXPECT_EQ(r.edge_count(), 5u);
  EXPECT_EQ(degrees(r), std::vector<std::size_t>(5, 2));
  EXPECT_EQ(Topology::ring(3), Topology::fully_connected(3));
  auto big = Topology::ring(20);
  std::size_t ecc = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    auto d = oracle::bfs(big.matrix(), i);
    ecc = std::max(ecc, *std::max_element(d.begin(), d.end()));
  }
  EXPECT_EQ(ecc, 10u);
  EXPECT_EQ(big.diameter(), ecc);
  EXPECT_EQ(code_of([] { Topology::ring(2); }), Errc::InvalidSize);
}

TEST(Topology, RandomConnected) {
  EXPECT_EQ(Topology::random_connected(5, 1.0, 123), Topology::fully_connected(5));
  EXPECT_EQ(Topology::random_connected(10, 0.5, 42), Topology::random_connected(10, 0.5, 42));
  auto t = Topology::random_connected(10, 0.3, 7);
  auto d = oracle::bfs(t.matrix(), 0);
  EXPECT_TRUE(std::none_of(d.begin(), d.end(), [](auto x) { return x == SIZE_MAX; }));
  EXPECT_TRUE(t.is_connected());
  EXPECT_EQ(code_of([] { Topology::random_connected(30, 0.001, 1); }), Errc::GenerationFailed);
}

TEST(Topology, Custom) {
  auto t = Topology::from_custom({{0, 1}, {1, 0}});
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.edge_count(), 1u);
  EXPECT_EQ(code_of([] { Topology::from_custom({{0, 1}, {0, 0}}); }), Errc::NotSymmetric);
  EXPECT_EQ(code_of([] { Topology::from_custom({{1, 1}, {1, 0}}); }), Errc::SelfLoop);
  EXPECT_EQ(code_of([] { Topology::from_custom({{0, 1, 0}, {1, 0, 0}, {0, 0, 0}}); }), Errc::Disconnected);
}

TEST(Topology, Neighbors) {
  EXPECT_EQ(Topology::ring(5).neighbors(0), (std::vector<NodeId>{1, 4}));
  EXPECT_EQ(Topology::star(4, 0).neighbors(2), (std::vector<NodeId>{0}));
  EXPECT_EQ(Topology::fully_connected(4).neighbors(1), (std::vector<NodeId>{0, 2, 3}));
  EXPECT_EQ(code_of([] { Topology::ring(5).neighbors(5); }), Errc::InvalidIndex);
}

TEST(Topology, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "meshfl_topology_rt.txt";
  const auto t = Topology::random_connected(12, 0.4, 9);
  save_topology_file(t, path);
  EXPECT_EQ(load_topology_file(path), t);
  EXPECT_EQ(parse_adjacency(format_adjacency(t)), t);
  std::filesystem::remove(path);
}
