#include <gtest/gtest.h>

#include <random>

#include "meshfl/aggregation.hpp"
#include "meshfl/error.hpp"
#include "oracles.hpp"

using namespace meshfl;

namespace {

void expect_close(const Vector& a, const Vector& b, double tol = 1e-12) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "coordinate " << i;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::IoError;
}

}  // namespace

TEST(Aggregation, FedAvgExamples) {
  const std::vector<Vector> one{{4.0}};
  EXPECT_EQ(fedavg(Vector{2.0}, one), Vector{3.0});
  EXPECT_EQ(fedavg(Vector{1.5, -2.0}, {}), (Vector{1.5, -2.0}));
  const std::vector<Vector> two{{2, 4}, {3, 7}};
  EXPECT_EQ(fedavg(Vector{1, 1}, two), (Vector{2.0, 4.0}));
  const std::vector<Vector> bad{{1.0, 2.0}};
  EXPECT_EQ(code_of([&] { fedavg(Vector{1.0}, bad); }), Errc::ShapeMismatch);
}

TEST(Aggregation, KrumExamples) {
  const std::vector<Vector> same(3, Vector{1.0, 2.0});
  EXPECT_EQ(krum_index(same, 0), 0u);
  const std::vector<Vector> outlier{{0.0}, {0.1}, {-0.1}, {100.0}};
  EXPECT_EQ(krum_index(outlier, 0), oracle::krum_index(outlier, 0));
  EXPECT_NE(krum(outlier, 0), Vector{100.0});
  std::mt19937_64 rng(3);
  const auto seven = oracle::random_vectors(rng, 7, 4);
  EXPECT_EQ(krum(seven, 2), seven[oracle::krum_index(seven, 2)]);
  EXPECT_EQ(code_of([&] { krum(seven, 3); }), Errc::TooFewVectors);
}

TEST(Aggregation, TrimmedMeanExamples) {
  const std::vector<Vector> col{{1}, {2}, {3}, {100}};
  EXPECT_EQ(trimmed_mean(col, 1), Vector{2.5});
  std::mt19937_64 rng(4);
  const auto vs = oracle::random_vectors(rng, 5, 3);
  expect_close(trimmed_mean(vs, 0), oracle::mean(vs));
  const auto nine = oracle::random_vectors(rng, 9, 4);
  expect_close(trimmed_mean(nine, 2), oracle::trimmed_mean(nine, 2));
  EXPECT_EQ(code_of([&] { trimmed_mean(col, 2); }), Errc::TooFewVectors);
}

TEST(Aggregation, MedianExamples) {
  EXPECT_EQ(median(std::vector<Vector>{{1}, {2}, {9}}), Vector{2});
  EXPECT_EQ(median(std::vector<Vector>{{1}, {3}}), Vector{2});
  EXPECT_EQ(median(std::vector<Vector>{{4, 5}}), (Vector{4, 5}));
  EXPECT_EQ(code_of([] { median(std::vector<Vector>{}); }), Errc::TooFewVectors);
}

TEST(Aggregation, RandomInstancesMatchOracles) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng() % 7, d = 1 + rng() % 5;
    const auto vs = oracle::random_vectors(rng, n, d);
    const Vector own = vs[0];
    const std::vector<Vector> rest(vs.begin() + 1, vs.end());
    expect_close(fedavg(own, rest), oracle::mean(vs));
    const std::size_t f = (n - 3) / 2;
    EXPECT_EQ(krum(vs, f), vs[oracle::krum_index(vs, f)]);
    const std::size_t k = (n - 1) / 2;
    expect_close(trimmed_mean(vs, k), oracle::trimmed_mean(vs, k));
    expect_close(median(vs), oracle::median(vs));
  }
}

TEST(Aggregation, PermutationInvariance) {
  std::mt19937_64 rng(8);
  auto vs = oracle::random_vectors(rng, 7, 3);
  const auto a = trimmed_mean(vs, 2), m = median(vs), k = krum(vs, 2);
  std::shuffle(vs.begin(), vs.end(), rng);
  expect_close(trimmed_mean(vs, 2), a);
  expect_close(median(vs), m);
  EXPECT_EQ(krum(vs, 2), k);
}

TEST(Aggregation, SpecDispatch) {
  AggregatorSpec spec;
  EXPECT_EQ(spec.min_inputs(), 1u);
  spec.kind = AggregatorKind::Krum;
  spec.f = 1;
  EXPECT_EQ(spec.min_inputs(), 5u);
  spec.kind = AggregatorKind::TrimmedMean;
  spec.k_trim = 2;
  EXPECT_EQ(spec.min_inputs(), 5u);
  const std::vector<Vector> vs{{1}, {2}, {3}, {4}, {50}};
  EXPECT_EQ(aggregate(spec, vs), Vector{3});
  EXPECT_EQ(parse_aggregator("trimmed_mean"), AggregatorKind::TrimmedMean);
  EXPECT_EQ(to_string(AggregatorKind::Median), "median");
}
