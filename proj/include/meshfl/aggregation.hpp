#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace meshfl {

using Vector = std::vector<double>;

enum class AggregatorKind { FedAvg, Krum, TrimmedMean, Median };

std::string to_string(AggregatorKind kind);
/// "fedavg" | "krum" | "trimmed_mean" | "median"
AggregatorKind parse_aggregator(std::string_view name);

struct AggregatorSpec {
  AggregatorKind kind = AggregatorKind::FedAvg;
  std::size_t f = 0;       // Krum Byzantine tolerance
  std::size_t k_trim = 0;  // trimmed-mean trim count per side

  /// Smallest candidate count the aggregator accepts.
  std::size_t min_inputs() const;
};

/// (own + sum(received)) / (|received| + 1), unweighted.
Vector fedavg(std::span<const double> own, std::span<const Vector> received);

/// Vector with the smallest sum of squared distances to its n - f - 2 nearest
/// others; ties go to the lowest index. Requires n >= 2f + 3.
Vector krum(std::span<const Vector> vectors, std::size_t f);
/// Index picked by `krum`.
std::size_t krum_index(std::span<const Vector> vectors, std::size_t f);

/// Per coordinate: drop the k_trim largest and smallest values, average the rest.
Vector trimmed_mean(std::span<const Vector> vectors, std::size_t k_trim);

/// Per-coordinate median; even counts average the two middle values.
Vector median(std::span<const Vector> vectors);

/// Applies `spec` to the candidate set. Robust aggregators treat `vectors[0]`
/// as just another candidate; FedAvg averages all of them.
Vector aggregate(const AggregatorSpec& spec, std::span<const Vector> vectors);

}  // namespace meshfl
