#include "meshfl/aggregation.hpp"

#include <algorithm>
#include <limits>

#include "meshfl/error.hpp"

namespace meshfl {

namespace {

std::size_t common_length(std::span<const Vector> vectors) {
  const auto len = vectors.front().size();
  for (const auto& v : vectors)
    if (v.size() != len)
      throw Error(Errc::ShapeMismatch, "vector lengths " + std::to_string(len) + " and " +
                                           std::to_string(v.size()));
  return len;
}

double squared_distance(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Mean of sorted[first, last) taken as an offset from its minimum, so equal
// inputs reproduce themselves exactly and the summation order is canonical.
double sorted_mean(const std::vector<double>& sorted, std::size_t first, std::size_t last) {
  const double lo = sorted[first];
  double acc = 0.0;
  for (std::size_t k = first; k < last; ++k) acc += sorted[k] - lo;
  const double m = lo + acc / static_cast<double>(last - first);
  return std::clamp(m, lo, sorted[last - 1]);
}

template <typename Reduce>
Vector coordinatewise(std::span<const Vector> vectors, Reduce reduce) {
  const auto len = common_length(vectors);
  Vector out(len);
  std::vector<double> column(vectors.size());
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t k = 0; k < vectors.size(); ++k) column[k] = vectors[k][i];
    std::sort(column.begin(), column.end());
    out[i] = reduce(column);
  }
  return out;
}

}  // namespace

std::string to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::FedAvg: return "fedavg";
    case AggregatorKind::Krum: return "krum";
    case AggregatorKind::TrimmedMean: return "trimmed_mean";
    case AggregatorKind::Median: return "median";
  }
  return "fedavg";
}

AggregatorKind parse_aggregator(std::string_view name) {
  if (name == "fedavg") return AggregatorKind::FedAvg;
  if (name == "krum") return AggregatorKind::Krum;
  if (name == "trimmed_mean") return AggregatorKind::TrimmedMean;
  if (name == "median") return AggregatorKind::Median;
  throw Error(Errc::InvalidScenario, "unknown aggregator '" + std::string(name) + "'");
}

std::size_t AggregatorSpec::min_inputs() const {
  switch (kind) {
    case AggregatorKind::Krum: return 2 * f + 3;
    case AggregatorKind::TrimmedMean: return 2 * k_trim + 1;
    default: return 1;
  }
}

Vector fedavg(std::span<const double> own, std::span<const Vector> received) {
  std::vector<Vector> all;
  all.reserve(received.size() + 1);
  all.emplace_back(own.begin(), own.end());
  all.insert(all.end(), received.begin(), received.end());
  return coordinatewise(all, [](const std::vector<double>& sorted) {
    return sorted_mean(sorted, 0, sorted.size());
  });
}

std::size_t krum_index(std::span<const Vector> vectors, std::size_t f) {
  const auto n = vectors.size();
  if (n < 2 * f + 3)
    throw Error(Errc::TooFewVectors, "krum needs n >= 2f+3 (n=" + std::to_string(n) +
                                         ", f=" + std::to_string(f) + ")");
  common_length(vectors);
  const auto nearest = n - f - 2;

  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      dist[i * n + j] = dist[j * n + i] = squared_distance(vectors[i], vectors[j]);

  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row.push_back(dist[i * n + j]);
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(nearest), row.end());
    double score = 0.0;
    for (std::size_t k = 0; k < nearest; ++k) score += row[k];
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

Vector krum(std::span<const Vector> vectors, std::size_t f) { return vectors[krum_index(vectors, f)]; }

Vector trimmed_mean(std::span<const Vector> vectors, std::size_t k_trim) {
  if (vectors.size() <= 2 * k_trim)
    throw Error(Errc::TooFewVectors, "trimmed mean needs more than 2*k_trim vectors");
  return coordinatewise(vectors, [k_trim](const std::vector<double>& sorted) {
    return sorted_mean(sorted, k_trim, sorted.size() - k_trim);
  });
}

Vector median(std::span<const Vector> vectors) {
  if (vectors.empty()) throw Error(Errc::TooFewVectors, "median of no vectors");
  return coordinatewise(vectors, [](const std::vector<double>& sorted) {
    const auto m = sorted.size() / 2;
    return sorted.size() % 2 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
  });
}

Vector aggregate(const AggregatorSpec& spec, std::span<const Vector> vectors) {
  if (vectors.empty()) throw Error(Errc::TooFewVectors, "nothing to aggregate");
  switch (spec.kind) {
    case AggregatorKind::FedAvg: return fedavg(vectors.front(), vectors.subspan(1));
    case AggregatorKind::Krum: return krum(vectors, spec.f);
    case AggregatorKind::TrimmedMean: return trimmed_mean(vectors, spec.k_trim);
    case AggregatorKind::Median: return median(vectors);
  }
  throw Error(Errc::InvalidScenario, "unhandled aggregator");
}

}  // namespace meshfl
