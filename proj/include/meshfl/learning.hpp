#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "meshfl/data.hpp"

namespace meshfl {

enum class TrainerKind { Logistic, Mlp, Autoencoder };

std::string to_string(TrainerKind kind);
/// Throws Errc::UnknownTrainer for anything but "logistic", "mlp", "autoencoder".
TrainerKind parse_trainer_kind(std::string_view name);

struct TrainerSpec {
  TrainerKind kind = TrainerKind::Logistic;
  std::size_t dim = 0;
  std::size_t classes = 2;
  std::size_t hidden = 8;  // mlp and autoencoder only
};

struct TensorShape {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;

  std::size_t extent() const { return rows * cols; }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

/// Flat model parameters plus the per-tensor layout that gives them meaning.
struct ParamVector {
  std::vector<double> values;
  std::vector<TensorShape> layout;

  std::size_t size() const { return values.size(); }
  bool all_finite() const;
  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

struct TrainingConfig {
  std::size_t epochs = 20;
  double alpha = 0.1;
  double lambda = 0.0;
  std::size_t rounds = 10;
  std::size_t batch_size = 32;

  void validate() const;
};

struct EvalMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t sample_count = 0;
};

/// Differentiable model: per-sample objective J(theta, x, y) and its gradient.
class Trainer {
 public:
  explicit Trainer(TrainerSpec spec) : spec_(spec) {}
  virtual ~Trainer() = default;

  const TrainerSpec& spec() const { return spec_; }
  std::vector<TensorShape> layout() const;
  std::size_t param_count() const;

  /// J for one sample; when `grad` is non-empty the sample gradient is added into it.
  virtual double sample_loss(std::span<const double> params, std::span<const double> x,
                             std::size_t label, std::span<double> grad) const = 0;

  /// Classifier logits, or the reconstruction for the autoencoder.
  virtual std::vector<double> forward(std::span<const double> params,
                                      std::span<const double> x) const = 0;

  /// Mean loss over `rows`; mean gradient added into `grad` when non-empty.
  double batch_loss(std::span<const double> params, const Dataset& data,
                    std::span<const std::size_t> rows, std::span<double> grad) const;

 protected:
  virtual std::vector<TensorShape> make_layout() const = 0;

 private:
  TrainerSpec spec_;
};

std::unique_ptr<Trainer> make_trainer(const TrainerSpec& spec);

ParamVector init_params(const TrainerSpec& spec, std::uint64_t seed);

/// Mini-batch SGD with the L2 term folded into each step:
/// theta <- theta - alpha * (grad J + lambda * theta). The input is not modified.
ParamVector train_local(const Trainer& trainer, const ParamVector& params, const Dataset& shard,
                        const TrainingConfig& cfg, std::uint64_t seed);

EvalMetrics evaluate(const Trainer& trainer, const ParamVector& params, const Dataset& test);

// Scoring helpers shared by both evaluate overloads.
struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// counts[true][predicted]
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const std::size_t> labels,
                                                       std::span<const std::size_t> predicted,
                                                       std::size_t classes);
ClassScores class_scores(const std::vector<std::vector<std::size_t>>& confusion, std::size_t cls);

/// Accuracy plus macro precision/recall over the classes that occur in either
/// vector; f1 is the harmonic mean of the two macro values.
EvalMetrics score_predictions(std::span<const std::size_t> labels,
                              std::span<const std::size_t> predicted, std::size_t classes);

/// Percentile with linear interpolation between order statistics (q in [0, 100]).
double percentile(std::vector<double> values, double q);

struct AnomalyModel {
  ParamVector params;
  std::optional<double> threshold;

  bool is_anomaly(double reconstruction_error) const;
};

std::vector<double> reconstruction_errors(const Trainer& autoencoder, const ParamVector& params,
                                          const Dataset& data);

/// Sets the threshold to the 95th percentile of `train_errors` (at least 20 values).
AnomalyModel fit_anomaly_threshold(AnomalyModel model, std::span<const double> train_errors);

/// Label 1 = anomaly. Loss is the mean reconstruction error.
EvalMetrics evaluate_anomaly(const Trainer& autoencoder, const AnomalyModel& model,
                             const Dataset& test);

}  // namespace meshfl
