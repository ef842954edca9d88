#include "meshfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "meshfl/error.hpp"

namespace meshfl {

namespace {

constexpr double kCenterBox = 2.0;
constexpr double kAnomalyShift = 4.0;
constexpr double kAnomalyNoise = 0.05;
constexpr std::size_t kLatentDim = 2;

std::vector<std::size_t> iota_vec(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

// Well-separated centers by rejection; the separation threshold relaxes when
// the box is too crowded for it.
std::vector<double> pick_centers(std::size_t classes, std::size_t dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> box(-kCenterBox, kCenterBox);
  std::vector<double> centers;
  double min_dist = 1.0;
  while (centers.size() < classes * dim) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      std::vector<double> cand(dim);
      for (auto& v : cand) v = box(rng);
      bool ok = true;
      for (std::size_t c = 0; c * dim < centers.size() && ok; ++c) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
          const double diff = cand[k] - centers[c * dim + k];
          d2 += diff * diff;
        }
        ok = std::sqrt(d2) >= min_dist;
      }
      if (ok) {
        centers.insert(centers.end(), cand.begin(), cand.end());
        placed = true;
      }
    }
    if (!placed) min_dist *= 0.9;
  }
  return centers;
}

Dataset shuffled(const Dataset& data, std::mt19937_64& rng) {
  auto order = iota_vec(data.rows());
  std::shuffle(order.begin(), order.end(), rng);
  return data.subset(order);
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.dim = dim;
  out.classes = classes;
  out.features.reserve(indices.size() * dim);
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    if (i >= rows()) throw Error(Errc::InvalidIndex, "row " + std::to_string(i));
    auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(labels[i]);
  }
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(classes, 0);
  for (auto l : labels) ++counts.at(l);
  return counts;
}

Dataset synthetic_blobs(std::size_t samples, std::size_t classes, std::size_t dim, double spread,
                        std::uint64_t seed) {
  if (classes < 2 || samples < classes) throw Error(Errc::InvalidSize, "blobs need samples >= classes >= 2");
  if (dim < 1) throw Error(Errc::InvalidSize, "blobs need dim >= 1");
  if (!(spread > 0.0)) throw Error(Errc::InvalidSize, "spread must be positive");

  std::mt19937_64 rng(seed);
  const auto centers = pick_centers(classes, dim, rng);
  std::normal_distribution<double> noise(0.0, spread);

  Dataset data;
  data.dim = dim;
  data.classes = classes;
  data.features.reserve(samples * dim);
  for (std::size_t i = 0; i < samples; ++i) {
    const auto label = i % classes;
    for (std::size_t k = 0; k < dim; ++k) data.features.push_back(centers[label * dim + k] + noise(rng));
    data.labels.push_back(label);
  }
  return shuffled(data, rng);
}

Dataset synthetic_anomaly(std::size_t normal, std::size_t anomalous, std::size_t dim,
                          std::uint64_t seed) {
  if (normal < 20 || anomalous < 1 || dim < 1)
    throw Error(Errc::InvalidSize, "anomaly data needs >= 20 normal rows, >= 1 anomaly, dim >= 1");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, kAnomalyNoise);

  std::vector<double> basis(dim * kLatentDim);
  for (auto& b : basis) b = 0.5 * unit(rng);
  std::vector<double> shift(dim);
  double norm = 0.0;
  for (auto& s : shift) {
    s = unit(rng);
    norm += s * s;
  }
  norm = std::sqrt(norm);
  for (auto& s : shift) s *= kAnomalyShift / norm;

  Dataset data;
  data.dim = dim;
  data.classes = 2;
  data.features.reserve((normal + anomalous) * dim);
  for (std::size_t i = 0; i < normal + anomalous; ++i) {
    const bool is_anomaly = i >= normal;
    double z[kLatentDim];
    for (auto& v : z) v = unit(rng);
    for (std::size_t k = 0; k < dim; ++k) {
      double x = jitter(rng);
      for (std::size_t l = 0; l < kLatentDim; ++l) x += basis[k * kLatentDim + l] * z[l];
      if (is_anomaly) x += shift[k];
      data.features.push_back(x);
    }
    data.labels.push_back(is_anomaly ? 1 : 0);
  }
  return shuffled(data, rng);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t rows,
                                                                            double test_fraction,
                                                                            std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error(Errc::InvalidFraction, "test fraction must be in (0, 1)");
  // The epsilon absorbs representation error, e.g. 0.99 * 100.
  const auto n_test = static_cast<std::size_t>(std::floor(rows * test_fraction + 1e-9));
  if (n_test == 0 || n_test >= rows)
    throw Error(Errc::InvalidFraction, "split leaves an empty side");
  auto order = iota_vec(rows);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  auto [train, test] = split_indices(data.rows(), test_fraction, seed);
  return {data.subset(train), data.subset(test)};
}

Partition partition_iid(std::size_t train_size, std::size_t participants, std::uint64_t seed) {
  if (participants < 1 || participants > train_size)
    throw Error(Errc::InvalidSize, "need 1 <= participants <= train size");
  auto order = iota_vec(train_size);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  Partition p;
  const auto base = train_size / participants;
  const auto extra = train_size % participants;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < participants; ++k) {
    // Lowest-indexed shards absorb the remainder.
    const auto len = base + (k < extra ? 1 : 0);
    p.shards.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(pos),
                          order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return p;
}

Partition partition_noniid(std::span<const std::size_t> labels, std::size_t participants,
                           std::size_t shards_per_client, std::uint64_t seed) {
  const auto total_shards = participants * shards_per_client;
  if (participants < 1 || shards_per_client < 1 || total_shards > labels.size())
    throw Error(Errc::InvalidSize, "participants * shards_per_client exceeds train size");

  auto sorted = iota_vec(labels.size());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });

  std::vector<std::vector<std::size_t>> pieces;
  const auto base = labels.size() / total_shards;
  const auto extra = labels.size() % total_shards;
  std::size_t pos = 0;
  for (std::size_t s = 0; s < total_shards; ++s) {
    const auto len = base + (s < extra ? 1 : 0);
    pieces.emplace_back(sorted.begin() + static_cast<std::ptrdiff_t>(pos),
                        sorted.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }

  auto deal = iota_vec(total_shards);
  std::mt19937_64 rng(seed);
  std::shuffle(deal.begin(), deal.end(), rng);

  Partition p;
  p.shards.resize(participants);
  for (std::size_t k = 0; k < participants; ++k) {
    for (std::size_t s = 0; s < shards_per_client; ++s) {
      const auto& piece = pieces[deal[k * shards_per_client + s]];
      p.shards[k].insert(p.shards[k].end(), piece.begin(), piece.end());
    }
  }
  return p;
}

bool is_valid_partition(const Partition& p, std::size_t total) {
  std::vector<bool> seen(total, false);
  std::size_t covered = 0;
  for (const auto& shard : p.shards) {
    if (shard.empty()) return false;
    for (auto i : shard) {
      if (i >= total || seen[i]) return false;
      seen[i] = true;
      ++covered;
    }
  }
  return covered == total;
}

void save_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  for (std::size_t k = 0; k < data.dim; ++k) out << 'f' << k << ',';
  out << "label\n";
  out.precision(17);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (auto v : data.row(i)) out << v << ',';
    out << data.labels[i] << '\n';
  }
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

Dataset load_dataset_csv(const std::filesystem::path& path, std::size_t classes) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::ParseError, "missing header");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 2 || line.substr(line.rfind(',') + 1) != "label")
    throw Error(Errc::ParseError, "header must be f0..f{d-1},label");

  Dataset data;
  data.dim = columns - 1;
  std::size_t max_label = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(fields, cell, ',')) {
      try {
        if (col < data.dim) {
          data.features.push_back(std::stod(cell));
        } else if (col == data.dim) {
          data.labels.push_back(std::stoul(cell));
          max_label = std::max(max_label, data.labels.back());
        }
      } catch (const std::exception&) {
        throw Error(Errc::ParseError, "bad cell '" + cell + "'");
      }
      ++col;
    }
    if (col != columns) throw Error(Errc::ParseError, "row has " + std::to_string(col) + " cells");
  }
  data.classes = std::max(classes, max_label + 1);
  return data;
}

Dataset build_dataset(const DatasetSpec& spec) {
  if (spec.kind == DatasetKind::Anomaly)
    return synthetic_anomaly(spec.samples, spec.anomalies, spec.dim, spec.seed);
  return synthetic_blobs(spec.samples, spec.classes, spec.dim, spec.spread, spec.seed);
}

}  // namespace meshfl
