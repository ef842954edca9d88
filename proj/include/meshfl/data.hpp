#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace meshfl {

/// Row-major feature matrix with one class label per row.
struct Dataset {
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::vector<double> features;  // rows() * dim
  std::vector<std::size_t> labels;

  std::size_t rows() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * dim, dim};
  }

  /// Rows at `indices`, in that order.
  Dataset subset(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> class_counts() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Disjoint index lists into a training set, one per participant.
struct Partition {
  std::vector<std::vector<std::size_t>> shards;
};

Dataset synthetic_blobs(std::size_t samples, std::size_t classes, std::size_t dim, double spread,
                        std::uint64_t seed);

/// Normal rows lie near a random 2-D subspace; anomalies carry a large fixed offset.
/// Label 0 = normal, 1 = anomaly.
Dataset synthetic_anomaly(std::size_t normal, std::size_t anomalous, std::size_t dim,
                          std::uint64_t seed);

/// Shuffled train/test split; the test side gets floor(rows * test_fraction) rows.
std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed);

/// Same as `split` but returns the (train, test) row indices into `data`.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t rows,
                                                                            double test_fraction,
                                                                            std::uint64_t seed);

Partition partition_iid(std::size_t train_size, std::size_t participants, std::uint64_t seed);

/// Label sharding: sort by label, cut into participants * shards_per_client
/// contiguous shards, deal them out through a seeded permutation.
Partition partition_noniid(std::span<const std::size_t> labels, std::size_t participants,
                           std::size_t shards_per_client, std::uint64_t seed);

/// Disjoint, exhaustive over [0, total), no empty shard.
bool is_valid_partition(const Partition& p, std::size_t total);

enum class DatasetKind { Blobs, Anomaly };

/// Generator parameters; every node rebuilds the same dataset from these.
struct DatasetSpec {
  DatasetKind kind = DatasetKind::Blobs;
  std::size_t samples = 600;  // anomaly: normal rows
  std::size_t classes = 3;
  std::size_t dim = 4;
  double spread = 0.6;
  std::size_t anomalies = 0;
  std::uint64_t seed = 0;
};

Dataset build_dataset(const DatasetSpec& spec);

// CSV with header f0..f{d-1},label.
void save_dataset_csv(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset_csv(const std::filesystem::path& path, std::size_t classes = 0);

}  // namespace meshfl
