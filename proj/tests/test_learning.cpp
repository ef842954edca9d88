#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "meshfl/data.hpp"
#include "meshfl/error.hpp"
#include "meshfl/learning.hpp"
#include "oracles.hpp"

using namespace meshfl;

namespace {

TrainerSpec spec_of(TrainerKind kind, std::size_t dim, std::size_t classes, std::size_t hidden = 8) {
  TrainerSpec s;
  s.kind = kind;
  s.dim = dim;
  s.classes = classes;
  s.hidden = hidden;
  return s;
}

double relative_gap(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

}  // namespace

TEST(Learning, LayoutLengths) {
  EXPECT_EQ(init_params(spec_of(TrainerKind::Logistic, 4, 3), 0).size(), 15u);
  EXPECT_EQ(init_params(spec_of(TrainerKind::Mlp, 4, 3, 8), 0).size(), 67u);
  EXPECT_EQ(init_params(spec_of(TrainerKind::Mlp, 4, 3), 5), init_params(spec_of(TrainerKind::Mlp, 4, 3), 5));
  try {
    parse_trainer_kind("resnet");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownTrainer);
  }
}

TEST(Learning, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> N(0.0, 1.0);
  for (auto kind : {TrainerKind::Logistic, TrainerKind::Mlp, TrainerKind::Autoencoder}) {
    const auto spec = spec_of(kind, 5, 3, 4);
    const auto trainer = make_trainer(spec);
    for (int point = 0; point < 10; ++point) {
      std::vector<double> theta(trainer->param_count()), x(spec.dim);
      for (auto& v : theta) v = 0.5 * N(rng);
      for (auto& v : x) v = N(rng);
      const std::size_t label = rng() % spec.classes;
      std::vector<double> grad(theta.size(), 0.0);
      trainer->sample_loss(theta, x, label, grad);
      const auto numeric = oracle::numeric_gradient(
          [&](const std::vector<double>& t) { return trainer->sample_loss(t, x, label, {}); }, theta);
      EXPECT_LE(relative_gap(grad, numeric), 1e-5) << to_string(kind) << " point " << point;
    }
  }
}

TEST(Learning, ZeroStepSizeKeepsParameters) {
  const auto spec = spec_of(TrainerKind::Logistic, 2, 2);
  const auto data = synthetic_blobs(40, 2, 2, 0.5, 2);
  const auto trainer = make_trainer(spec);
  TrainingConfig cfg;
  cfg.alpha = 0.0;
  cfg.epochs = 3;
  const auto p = init_params(spec, 1);
  EXPECT_EQ(train_local(*trainer, p, data, cfg, 9).values, p.values);
}

TEST(Learning, WeightDecayWithZeroGradient) {
  // One row with a zero feature and saturated biases: the data gradient is exactly 0.
  const auto spec = spec_of(TrainerKind::Logistic, 1, 2);
  const auto trainer = make_trainer(spec);
  Dataset data;
  data.dim = 1;
  data.classes = 2;
  data.features = {0.0};
  data.labels = {1};
  ParamVector p = init_params(spec, 0);
  p.values = {0.7, -0.3, -1000.0, 1000.0};  // weight(1x2), bias(1x2)
  TrainingConfig cfg;
  cfg.alpha = 0.1;
  cfg.lambda = 0.5;
  cfg.epochs = 1;
  cfg.batch_size = 1;
  const auto out = train_local(*trainer, p, data, cfg, 0);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_DOUBLE_EQ(out.values[i], p.values[i] * (1 - 0.1 * 0.5));
}

TEST(Learning, TrainingLowersLoss) {
  const auto spec = spec_of(TrainerKind::Logistic, 2, 2);
  const auto data = synthetic_blobs(200, 2, 2, 0.1, 4);
  const auto trainer = make_trainer(spec);
  TrainingConfig cfg;
  cfg.alpha = 0.1;
  cfg.lambda = 0.001;
  cfg.epochs = 20;
  const auto p0 = init_params(spec, 3);
  std::vector<std::size_t> rows(data.rows());
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<double> g(p0.size());
  const double before = trainer->batch_loss(p0.values, data, rows, g);
  const auto p1 = train_local(*trainer, p0, data, cfg, 3);
  const double after = trainer->batch_loss(p1.values, data, rows, g);
  EXPECT_LT(after, before);
}

TEST(Learning, TrainingErrors) {
  const auto spec = spec_of(TrainerKind::Logistic, 2, 2);
  const auto trainer = make_trainer(spec);
  TrainingConfig cfg;
  try {
    train_local(*trainer, init_params(spec, 0), Dataset{2, 2, {}, {}}, cfg, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyData);
  }
  cfg.alpha = 1e300;
  cfg.lambda = 1.0;  // decay term overflows on the second step
  try {
    train_local(*trainer, init_params(spec, 0), synthetic_blobs(40, 2, 2, 5.0, 1), cfg, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Diverged);
  }
  try {
    evaluate(*trainer, init_params(spec, 0), Dataset{2, 2, {}, {}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyData);
  }
}

TEST(Learning, ClassScores) {
  // Class 1: TP=2, FP=1, FN=1, TN=6.
  std::vector<std::size_t> labels{1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  std::vector<std::size_t> preds{1, 1, 0, 1, 0, 0, 0, 0, 0, 0};
  const auto s = class_scores(confusion_matrix(labels, preds, 2), 1);
  EXPECT_DOUBLE_EQ(s.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.f1, 2.0 / 3.0);
  const auto perfect = score_predictions(labels, labels, 2);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
}

TEST(Learning, RandomPredictorNearChance) {
  std::mt19937_64 rng(5);
  std::vector<std::size_t> labels, preds;
  for (int i = 0; i < 1000; ++i) {
    labels.push_back(i % 2);
    preds.push_back(rng() % 2);
  }
  EXPECT_NEAR(score_predictions(labels, preds, 2).accuracy, 0.5, 0.1);
}

TEST(Learning, AnomalyThreshold) {
  std::vector<double> errors;
  for (int i = 1; i <= 100; ++i) errors.push_back(i);
  const auto model = fit_anomaly_threshold({}, errors);
  ASSERT_TRUE(model.threshold);
  EXPECT_NEAR(*model.threshold, oracle::percentile(errors, 95), 1e-12);
  EXPECT_NEAR(*model.threshold, 95.05, 1e-12);
  EXPECT_TRUE(model.is_anomaly(2 * *model.threshold));
  EXPECT_FALSE(model.is_anomaly(*model.threshold / 2));
  EXPECT_EQ(*fit_anomaly_threshold({}, std::vector<double>(30, 5.0)).threshold, 5.0);
  try {
    fit_anomaly_threshold({}, std::vector<double>(19, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientData);
  }
}

TEST(Learning, TrainingConfigValidation) {
  TrainingConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.alpha = -1;
  EXPECT_THROW(cfg.validate(), Error);
}
