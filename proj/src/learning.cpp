#include "meshfl/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "meshfl/error.hpp"

namespace meshfl {

namespace {

constexpr double kAnomalyPercentile = 95.0;
constexpr std::size_t kMinThresholdSamples = 20;

std::vector<TensorShape> stack_shapes(std::initializer_list<std::pair<const char*, std::pair<std::size_t, std::size_t>>> items) {
  std::vector<TensorShape> shapes;
  std::size_t offset = 0;
  for (const auto& [name, dims] : items) {
    shapes.push_back({name, dims.first, dims.second, offset});
    offset += dims.first * dims.second;
  }
  return shapes;
}

// y = x * W + b for row vector x, W stored row-major (in x out).
void affine(std::span<const double> x, const double* w, const double* b, std::size_t out,
            std::vector<double>& y) {
  y.assign(b, b + out);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double* row = w + i * out;
    for (std::size_t j = 0; j < out; ++j) y[j] += xi * row[j];
  }
}

// Writes softmax(z) into z and returns -log p[label].
double softmax_xent(std::vector<double>& z, std::size_t label) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (auto& v : z) v /= sum;
  return -std::log(std::max(z[label], 1e-300));
}

// Accumulates gradients of a dense layer given the upstream gradient `dy`.
void affine_backward(std::span<const double> x, std::span<const double> dy, double* dw, double* db) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    double* row = dw + i * dy.size();
    for (std::size_t j = 0; j < dy.size(); ++j) row[j] += x[i] * dy[j];
  }
  for (std::size_t j = 0; j < dy.size(); ++j) db[j] += dy[j];
}

class LogisticTrainer final : public Trainer {
 public:
  using Trainer::Trainer;

  double sample_loss(std::span<const double> p, std::span<const double> x, std::size_t label,
                     std::span<double> grad) const override {
    const auto d = spec().dim, c = spec().classes;
    std::vector<double> z;
    affine(x, p.data(), p.data() + d * c, c, z);
    const double loss = softmax_xent(z, label);
    if (!grad.empty()) {
      z[label] -= 1.0;
      affine_backward(x, z, grad.data(), grad.data() + d * c);
    }
    return loss;
  }

  std::vector<double> forward(std::span<const double> p, std::span<const double> x) const override {
    const auto d = spec().dim, c = spec().classes;
    std::vector<double> z;
    affine(x, p.data(), p.data() + d * c, c, z);
    return z;
  }

 protected:
  std::vector<TensorShape> make_layout() const override {
    return stack_shapes({{"weight", {spec().dim, spec().classes}}, {"bias", {1, spec().classes}}});
  }
};

// One tanh hidden layer followed by a dense output; shared by the classifier
// MLP and the autoencoder, which differ only in the output head.
class HiddenLayerTrainer : public Trainer {
 public:
  using Trainer::Trainer;

  std::vector<double> forward(std::span<const double> p, std::span<const double> x) const override {
    std::vector<double> h, y;
    hidden(p, x, h);
    affine(h, p.data() + w2(), p.data() + b2(), outputs(), y);
    return y;
  }

 protected:
  virtual std::size_t outputs() const = 0;

  std::size_t w1() const { return 0; }
  std::size_t b1() const { return spec().dim * spec().hidden; }
  std::size_t w2() const { return b1() + spec().hidden; }
  std::size_t b2() const { return w2() + spec().hidden * outputs(); }

  void hidden(std::span<const double> p, std::span<const double> x, std::vector<double>& h) const {
    affine(x, p.data() + w1(), p.data() + b1(), spec().hidden, h);
    for (auto& v : h) v = std::tanh(v);
  }

  // Backpropagates the output gradient `dy` through both layers.
  void backward(std::span<const double> p, std::span<const double> x, const std::vector<double>& h,
                const std::vector<double>& dy, std::span<double> grad) const {
    const auto hid = spec().hidden, out = outputs();
    affine_backward(h, dy, grad.data() + w2(), grad.data() + b2());
    std::vector<double> da(hid, 0.0);
    for (std::size_t i = 0; i < hid; ++i) {
      const double* row = p.data() + w2() + i * out;
      double s = 0.0;
      for (std::size_t j = 0; j < out; ++j) s += row[j] * dy[j];
      da[i] = s * (1.0 - h[i] * h[i]);
    }
    affine_backward(x, da, grad.data() + w1(), grad.data() + b1());
  }

  std::vector<TensorShape> make_layout() const override {
    return stack_shapes({{"hidden.weight", {spec().dim, spec().hidden}},
                         {"hidden.bias", {1, spec().hidden}},
                         {"out.weight", {spec().hidden, outputs()}},
                         {"out.bias", {1, outputs()}}});
  }
};

class MlpTrainer final : public HiddenLayerTrainer {
 public:
  using HiddenLayerTrainer::HiddenLayerTrainer;

  double sample_loss(std::span<const double> p, std::span<const double> x, std::size_t label,
                     std::span<double> grad) const override {
    std::vector<double> h, z;
    hidden(p, x, h);
    affine(h, p.data() + w2(), p.data() + b2(), outputs(), z);
    const double loss = softmax_xent(z, label);
    if (!grad.empty()) {
      z[label] -= 1.0;
      backward(p, x, h, z, grad);
    }
    return loss;
  }

 protected:
  std::size_t outputs() const override { return spec().classes; }
};

/// Mean squared reconstruction error; labels are ignored.
class AutoencoderTrainer final : public HiddenLayerTrainer {
 public:
  using HiddenLayerTrainer::HiddenLayerTrainer;

  double sample_loss(std::span<const double> p, std::span<const double> x, std::size_t,
                     std::span<double> grad) const override {
    std::vector<double> h, y;
    hidden(p, x, h);
    affine(h, p.data() + w2(), p.data() + b2(), outputs(), y);
    const double scale = 1.0 / static_cast<double>(x.size());
    double loss = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double r = y[k] - x[k];
      loss += r * r;
      y[k] = 2.0 * scale * r;
    }
    if (!grad.empty()) backward(p, x, h, y, grad);
    return loss * scale;
  }

 protected:
  std::size_t outputs() const override { return spec().dim; }
};

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

void check_layout(const Trainer& trainer, const ParamVector& params) {
  if (params.size() != trainer.param_count())
    throw Error(Errc::ShapeMismatch, "expected " + std::to_string(trainer.param_count()) +
                                         " parameters, got " + std::to_string(params.size()));
}

}  // namespace

std::string to_string(TrainerKind kind) {
  switch (kind) {
    case TrainerKind::Logistic: return "logistic";
    case TrainerKind::Mlp: return "mlp";
    case TrainerKind::Autoencoder: return "autoencoder";
  }
  return "logistic";
}

TrainerKind parse_trainer_kind(std::string_view name) {
  if (name == "logistic") return TrainerKind::Logistic;
  if (name == "mlp") return TrainerKind::Mlp;
  if (name == "autoencoder") return TrainerKind::Autoencoder;
  throw Error(Errc::UnknownTrainer, std::string(name));
}

bool ParamVector::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void TrainingConfig::validate() const {
  if (epochs < 1 || rounds < 1 || batch_size < 1)
    throw Error(Errc::InvalidSize, "epochs, rounds and batch_size must be positive");
  if (!(alpha >= 0.0) || !(lambda >= 0.0))
    throw Error(Errc::InvalidSize, "alpha and lambda must be non-negative");
}

std::vector<TensorShape> Trainer::layout() const { return make_layout(); }

std::size_t Trainer::param_count() const {
  const auto shapes = make_layout();
  return shapes.back().offset + shapes.back().extent();
}

double Trainer::batch_loss(std::span<const double> params, const Dataset& data,
                           std::span<const std::size_t> rows, std::span<double> grad) const {
  if (rows.empty()) throw Error(Errc::EmptyData, "empty batch");
  std::vector<double> acc(grad.empty() ? 0 : grad.size(), 0.0);
  double total = 0.0;
  for (auto r : rows) total += sample_loss(params, data.row(r), data.labels[r], acc);
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (std::size_t i = 0; i < acc.size(); ++i) grad[i] += acc[i] * inv;
  return total * inv;
}

std::unique_ptr<Trainer> make_trainer(const TrainerSpec& spec) {
  if (spec.dim < 1) throw Error(Errc::InvalidSize, "feature dimension must be >= 1");
  switch (spec.kind) {
    case TrainerKind::Logistic:
      if (spec.classes < 2) throw Error(Errc::InvalidSize, "classifier needs >= 2 classes");
      return std::make_unique<LogisticTrainer>(spec);
    case TrainerKind::Mlp:
      if (spec.classes < 2 || spec.hidden < 1) throw Error(Errc::InvalidSize, "mlp needs classes >= 2, hidden >= 1");
      return std::make_unique<MlpTrainer>(spec);
    case TrainerKind::Autoencoder:
      if (spec.hidden < 1) throw Error(Errc::InvalidSize, "autoencoder needs hidden >= 1");
      return std::make_unique<AutoencoderTrainer>(spec);
  }
  throw Error(Errc::UnknownTrainer, "unhandled trainer kind");
}

ParamVector init_params(const TrainerSpec& spec, std::uint64_t seed) {
  const auto trainer = make_trainer(spec);
  ParamVector p;
  p.layout = trainer->layout();
  p.values.assign(trainer->param_count(), 0.0);
  std::mt19937_64 rng(seed);
  for (const auto& t : p.layout) {
    if (t.name.ends_with("bias")) continue;  // biases start at zero
    const double limit = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t i = 0; i < t.extent(); ++i) p.values[t.offset + i] = u(rng);
  }
  return p;
}

ParamVector train_local(const Trainer& trainer, const ParamVector& params, const Dataset& shard,
                        const TrainingConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  check_layout(trainer, params);
  if (shard.empty()) throw Error(Errc::EmptyData, "training shard is empty");

  ParamVector out = params;
  auto& theta = out.values;
  std::vector<double> grad(theta.size());
  std::vector<std::size_t> order(shard.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto len = std::min(cfg.batch_size, order.size() - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = trainer.batch_loss(theta, shard, std::span(order).subspan(start, len), grad);
      if (!std::isfinite(loss)) throw Error(Errc::Diverged, "non-finite training loss; alpha too large?");
      for (std::size_t i = 0; i < theta.size(); ++i)
        theta[i] -= cfg.alpha * (grad[i] + cfg.lambda * theta[i]);
    }
  }
  if (!out.all_finite()) throw Error(Errc::Diverged, "parameters became non-finite");
  return out;
}

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const std::size_t> labels,
                                                       std::span<const std::size_t> predicted,
                                                       std::size_t classes) {
  if (labels.size() != predicted.size()) throw Error(Errc::ShapeMismatch, "label/prediction length");
  std::vector<std::vector<std::size_t>> m(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) ++m.at(labels[i]).at(predicted[i]);
  return m;
}

ClassScores class_scores(const std::vector<std::vector<std::size_t>>& m, std::size_t cls) {
  std::size_t tp = m[cls][cls], predicted = 0, actual = 0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    predicted += m[k][cls];
    actual += m[cls][k];
  }
  ClassScores s;
  s.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
  s.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
  s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

EvalMetrics score_predictions(std::span<const std::size_t> labels,
                              std::span<const std::size_t> predicted, std::size_t classes) {
  if (labels.empty()) throw Error(Errc::EmptyData, "nothing to score");
  const auto m = confusion_matrix(labels, predicted, classes);
  std::set<std::size_t> present(labels.begin(), labels.end());
  present.insert(predicted.begin(), predicted.end());

  EvalMetrics out;
  out.sample_count = labels.size();
  std::size_t correct = 0;
  for (std::size_t k = 0; k < classes; ++k) correct += m[k][k];
  out.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  for (auto cls : present) {
    const auto s = class_scores(m, cls);
    out.precision += s.precision;
    out.recall += s.recall;
  }
  out.precision /= static_cast<double>(present.size());
  out.recall /= static_cast<double>(present.size());
  const double denom = out.precision + out.recall;
  out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
  return out;
}

EvalMetrics evaluate(const Trainer& trainer, const ParamVector& params, const Dataset& test) {
  check_layout(trainer, params);
  if (test.empty()) throw Error(Errc::EmptyData, "test set is empty");
  std::vector<std::size_t> predicted(test.rows());
  double loss = 0.0;
  for (std::size_t i = 0; i < test.rows(); ++i) {
    auto z = trainer.forward(params.values, test.row(i));
    predicted[i] = argmax(z);
    loss += softmax_xent(z, test.labels[i]);
  }
  auto m = score_predictions(test.labels, predicted, trainer.spec().classes);
  m.loss = loss / static_cast<double>(test.rows());
  return m;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(Errc::InsufficientData, "percentile of empty sequence");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

bool AnomalyModel::is_anomaly(double reconstruction_error) const {
  return threshold && reconstruction_error > *threshold;
}

std::vector<double> reconstruction_errors(const Trainer& autoencoder, const ParamVector& params,
                                          const Dataset& data) {
  check_layout(autoencoder, params);
  std::vector<double> errors(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i)
    errors[i] = autoencoder.sample_loss(params.values, data.row(i), 0, {});
  return errors;
}

AnomalyModel fit_anomaly_threshold(AnomalyModel model, std::span<const double> train_errors) {
  if (train_errors.size() < kMinThresholdSamples)
    throw Error(Errc::InsufficientData, "need at least " + std::to_string(kMinThresholdSamples) +
                                            " reconstruction errors, got " +
                                            std::to_string(train_errors.size()));
  model.threshold = percentile({train_errors.begin(), train_errors.end()}, kAnomalyPercentile);
  return model;
}

EvalMetrics evaluate_anomaly(const Trainer& autoencoder, const AnomalyModel& model,
                             const Dataset& test) {
  if (test.empty()) throw Error(Errc::EmptyData, "test set is empty");
  const auto errors = reconstruction_errors(autoencoder, model.params, test);
  std::vector<std::size_t> predicted(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) predicted[i] = model.is_anomaly(errors[i]) ? 1 : 0;
  auto m = score_predictions(test.labels, predicted, 2);
  m.loss = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
  return m;
}

}  // namespace meshfl
