#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "loadcast/random.hpp"
#include "loadcast/training.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace loadcast {
namespace {

// ---------------------------------------------------------------- loss

TEST(MseLoss, Examples) {
  Vector p(2), t(2);
  p << 1.5, -2;
  EXPECT_EQ(mse_loss(p, p).loss, 0.0);
  t << p[0] - 3, p[1] + 3;
  const auto lg = mse_loss(p, t);
  EXPECT_DOUBLE_EQ(lg.loss, 9.0);
  EXPECT_DOUBLE_EQ(lg.grad[0], 3.0);
  EXPECT_DOUBLE_EQ(lg.grad[1], -3.0);
  EXPECT_THROW(mse_loss(p, Vector(3)), Error);
  EXPECT_THROW(mse_loss(Vector(), Vector()), Error);
}

TEST(MseLoss, GradientMatchesDifferences) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix pred = testkit::random_matrix(7, 1, rng, 3.0);
    const Vector target = testkit::random_matrix(7, 1, rng, 3.0).col(0);
    const Matrix grad = mse_loss(pred.col(0), target).grad;
    auto loss = [&] { return mse_loss(pred.col(0), target).loss; };
    EXPECT_LT(testkit::max_gradient_error({&pred}, {&grad}, loss, 1e-3), 1e-8);
  }
}

// ---------------------------------------------------------------- optimizers

Parameter scalar(double value, double grad) {
  Parameter p("w", 1, 1);
  p.value(0, 0) = value;
  p.grad(0, 0) = grad;
  return p;
}

TEST(Adam, ZeroGradientFromRest) {
  Rng rng(2);
  Parameter p("w", 3, 4);
  p.value = testkit::random_matrix(3, 4, rng);
  const Matrix before = p.value;
  OptimizerState state;
  for (int k = 0; k < 5; ++k) adam_step({&p}, state, 0.01);
  EXPECT_EQ(p.value, before);

  // Moments decay geometrically once the gradient vanishes.
  p.grad.setConstant(0.5);
  adam_step({&p}, state, 0.01);
  const Matrix m = state.m[0], v = state.v[0];
  p.grad.setZero();
  adam_step({&p}, state, 0.01);
  EXPECT_EQ(state.m[0], Matrix(0.9 * m));
  EXPECT_EQ(state.v[0], Matrix(0.999 * v));
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  for (double g : {0.3, -7.0}) {
    Parameter p = scalar(1.0, g);
    OptimizerState state;
    double prev = p.value(0, 0);
    for (int k = 0; k < 2000; ++k) {
      prev = p.value(0, 0);
      adam_step({&p}, state, 0.01);
    }
    EXPECT_NEAR(prev - p.value(0, 0), 0.01 * (g > 0 ? 1 : -1), 1e-8);
  }
}

TEST(Adam, ThreeStepTrace) {
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double grads[3] = {0.4, -1.2, 0.7};
  Parameter p = scalar(2.0, 0);
  OptimizerState state;
  double w = 2.0, m = 0, v = 0;
  for (int t = 1; t <= 3; ++t) {
    const double g = grads[t - 1];
    p.grad(0, 0) = g;
    adam_step({&p}, state, lr, b1, b2, eps);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t)), vhat = v / (1 - std::pow(b2, t));
    w -= lr * mhat / (std::sqrt(vhat) + eps);
    EXPECT_NEAR(p.value(0, 0), w, 1e-12) << t;
  }
  // First step: mhat = g, vhat = g^2, so the move is lr * sign(g) up to eps.
  EXPECT_NEAR(2.0 - lr * 0.4 / (0.4 + eps), 2.0 - 0.05, 1e-7);
}

TEST(RmsProp, ZeroGradientIsIdentity) {
  Parameter p = scalar(1.5, 2.0);
  OptimizerState state;
  rmsprop_step({&p}, state, 0.01);
  const double v = state.v[0](0, 0);
  const double w = p.value(0, 0);
  p.grad.setZero();
  rmsprop_step({&p}, state, 0.01);
  EXPECT_EQ(p.value(0, 0), w);
  EXPECT_EQ(state.v[0](0, 0), 0.9 * v);
  EXPECT_TRUE(state.m.empty());
}

TEST(RmsProp, ConstantGradientStepApproachesLearningRate) {
  for (double g : {0.02, -5.0}) {
    Parameter p = scalar(0.0, g);
    OptimizerState state;
    double prev = 0;
    for (int k = 0; k < 500; ++k) {
      prev = p.value(0, 0);
      rmsprop_step({&p}, state, 0.001);
    }
    EXPECT_NEAR(prev - p.value(0, 0), 0.001 * (g > 0 ? 1 : -1), 1e-9);
  }
}

TEST(RmsProp, ThreeStepTrace) {
  const double lr = 0.01, rho = 0.9, eps = 1e-8;
  const double grads[3] = {-0.3, 0.9, 2.5};
  Parameter p = scalar(-1.0, 0);
  OptimizerState state;
  double w = -1.0, v = 0;
  for (int t = 0; t < 3; ++t) {
    p.grad(0, 0) = grads[t];
    rmsprop_step({&p}, state, lr, rho, eps);
    v = rho * v + (1 - rho) * grads[t] * grads[t];
    w -= lr * grads[t] / (std::sqrt(v) + eps);
    EXPECT_NEAR(p.value(0, 0), w, 1e-12) << t;
  }
}

// ---------------------------------------------------------------- callbacks

TEST(Callbacks, FrozenLoss) {
  TrainConfig cfg;
  const std::vector<double> frozen(100, 0.5);
  const auto t = simulate_callbacks(frozen, cfg, 0.004337);
  EXPECT_EQ(t.lr_reductions, std::vector<int>{4});
  EXPECT_EQ(t.stopped_epoch, 6);
  EXPECT_EQ(t.best_epoch, 1);

  cfg.early_stop_patience = 1000;
  const auto longer = simulate_callbacks(frozen, cfg, 0.004337);
  ASSERT_GE(longer.lr_reductions.size(), 3u);
  EXPECT_EQ(longer.lr_reductions[0], 4);
  EXPECT_EQ(longer.lr_reductions[1], 7);
  EXPECT_EQ(longer.lr_reductions[2], 10);
  EXPECT_EQ(longer.stopped_epoch, 100);
  EXPECT_DOUBLE_EQ(longer.lr.back(), 1e-5);
}

TEST(Callbacks, StrictlyDecreasingNeverStops) {
  std::vector<double> losses;
  for (int e = 0; e < 100; ++e) losses.push_back(10.0 - 0.01 * e);
  const auto t = simulate_callbacks(losses, TrainConfig{}, 0.001);
  EXPECT_EQ(t.stopped_epoch, 100);
  EXPECT_TRUE(t.lr_reductions.empty());
  EXPECT_EQ(t.best_epoch, 100);
}

TEST(Callbacks, ImprovementNeedsMoreThanMinDelta) {
  const auto t = simulate_callbacks({1.0, 1.0 - 5e-8, 1.0 - 9e-8, 1.0 - 1.5e-7, 1.0, 1.0, 1.0, 1.0, 1.0}, TrainConfig{}, 0.01);
  EXPECT_EQ(t.best_epoch, 4);
  EXPECT_EQ(t.lr_reductions, std::vector<int>{7});
  EXPECT_EQ(t.stopped_epoch, 9);
}

// Random walks with flat stretches and occasional ties around min_delta.
std::vector<double> scripted_losses(Rng& rng) {
  const auto n = 1 + rng.below(60);
  std::vector<double> out;
  double level = 1.0;
  for (std::size_t e = 0; e < n; ++e) {
    const double u = rng.uniform();
    if (u < 0.3) level -= rng.uniform(0, 0.05);
    else if (u < 0.5) level -= 1e-7 * rng.uniform(0, 2);
    else if (u < 0.8) level += rng.uniform(0, 0.02);
    out.push_back(level);
  }
  return out;
}

TEST(Callbacks, MatchSimulationOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto losses = scripted_losses(rng);
    const double lr = trial % 3 == 0 ? 4e-5 : 0.004337;
    const auto got = simulate_callbacks(losses, TrainConfig{}, lr);
    const auto want = oracle::callbacks(losses, lr);
    ASSERT_EQ(got.lr, want.lr) << trial;
    ASSERT_EQ(got.lr_reductions, want.reductions) << trial;
    ASSERT_EQ(got.stopped_epoch, want.stopped_epoch) << trial;
    ASSERT_EQ(got.best_epoch, want.best_epoch) << trial;
  }
}

TEST(Callbacks, LearningRateNeverRisesOrUndershoots) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto t = simulate_callbacks(scripted_losses(rng), TrainConfig{}, 1e-4);
    for (std::size_t e = 0; e < t.lr.size(); ++e) {
      EXPECT_GE(t.lr[e], 1e-5 - 1e-15);
      if (e > 0) EXPECT_LE(t.lr[e], t.lr[e - 1]);
    }
  }
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.plateau_factor = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.min_lr = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.learning_rate = -1.0;
  EXPECT_THROW(cfg.validate(), Error);
}

// ---------------------------------------------------------------- fit

// y = sum of every input entry, scaled to unit variance.
SequenceData sum_task(std::size_t n, int features, Rng& rng) {
  SequenceData d;
  const auto rows = static_cast<Eigen::Index>(n);
  d.horizontal = testkit::random_sequence(3, rows, features, rng);
  for (auto& m : d.horizontal) m *= std::sqrt(3.0);  // unit variance entries
  d.vertical = testkit::random_sequence(3, rows, features, rng);
  d.target = Vector::Zero(rows);
  for (const auto& m : d.horizontal) d.target += m.rowwise().sum();
  d.target /= std::sqrt(3.0 * features);
  d.target_plf = d.target;
  d.naive_plf = Vector::Zero(rows);
  return d;
}

TEST(Fit, LinearToyTaskConverges) {
  Rng rng(5);
  const auto train = sum_task(512, 8, rng);
  const auto val = sum_task(128, 8, rng);
  const auto spec = reference_spec(Variant::SlstmH);
  TrainConfig cfg;
  cfg.seed = 11;
  cfg.max_epochs = 100;
  const auto res = fit(spec, train, val, cfg);
  Model untrained(spec, Rng(cfg.seed).fork());
  const double initial = evaluate_loss(untrained, train);
  const double final_loss = evaluate_loss(*res.model, train);
  EXPECT_LT(final_loss, 0.01 * initial) << "initial " << initial << " final " << final_loss << " epochs "
                                         << res.log.stopped_epoch;
}

class SmallFit : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(6);
    train = sum_task(200, 3, rng);
    val = sum_task(60, 3, rng);
    spec = testkit::small_spec(Variant::DlstmHAGFRF, 3, 3);
    spec.dropout = 0.2;
    cfg.seed = 3;
    cfg.max_epochs = 25;
    cfg.batch_size = 16;
  }
  SequenceData train, val;
  ModelSpec spec;
  TrainConfig cfg;
};

TEST_F(SmallFit, Deterministic) {
  const auto a = fit(spec, train, val, cfg);
  const auto b = fit(spec, train, val, cfg);
  ASSERT_EQ(a.log.epochs.size(), b.log.epochs.size());
  for (std::size_t e = 0; e < a.log.epochs.size(); ++e) {
    EXPECT_EQ(a.log.epochs[e].train_loss, b.log.epochs[e].train_loss);
    EXPECT_EQ(a.log.epochs[e].val_loss, b.log.epochs[e].val_loss);
  }
  const auto pa = a.model->parameters(), pb = b.model->parameters();
  for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_EQ(pa[k]->value, pb[k]->value);
  cfg.seed = 4;
  const auto c = fit(spec, train, val, cfg);
  EXPECT_NE(c.log.epochs[0].train_loss, a.log.epochs[0].train_loss);
}

TEST_F(SmallFit, RestoredWeightsReproduceBestLoss) {
  const auto res = fit(spec, train, val, cfg);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : res.log.epochs) best = std::min(best, e.val_loss);
  EXPECT_EQ(res.log.best_val_loss, best);
  EXPECT_TRUE(res.log.restored);
  EXPECT_EQ(evaluate_loss(*res.model, val), best);
  EXPECT_EQ(res.log.epochs[static_cast<std::size_t>(res.log.best_epoch - 1)].val_loss, best);
}

TEST_F(SmallFit, LogAgreesWithCallbackOracle) {
  cfg.max_epochs = 60;
  cfg.learning_rate = 0.05;  // large enough to plateau quickly
  const auto res = fit(spec, train, val, cfg);
  std::vector<double> losses, lrs;
  for (const auto& e : res.log.epochs) losses.push_back(e.val_loss), lrs.push_back(e.lr);
  const auto want = oracle::callbacks(losses, 0.05);
  EXPECT_EQ(lrs, want.lr);
  EXPECT_EQ(res.log.lr_reductions, want.reductions);
  EXPECT_EQ(res.log.stopped_epoch, want.stopped_epoch);
  EXPECT_EQ(res.log.best_epoch, want.best_epoch);
  EXPECT_EQ(res.log.early_stopped, res.log.stopped_epoch < 60);
  for (std::size_t e = 1; e < lrs.size(); ++e) EXPECT_LE(lrs[e], lrs[e - 1]);
}

TEST_F(SmallFit, PartialBatchIsKept) {
  // 200 rows in batches of 64: the final batch of 8 still updates weights.
  cfg.batch_size = 64;
  cfg.max_epochs = 1;
  const auto a = fit(spec, train, val, cfg);
  SequenceData trimmed = train;
  std::vector<std::size_t> first(192);
  std::iota(first.begin(), first.end(), 0);
  const auto b = gather(train, first);
  trimmed.horizontal = b.horizontal;
  trimmed.vertical = b.vertical;
  trimmed.target = train.target.head(192);
  trimmed.target_plf = trimmed.target;
  trimmed.naive_plf = train.naive_plf.head(192);
  const auto c = fit(spec, trimmed, val, cfg);
  EXPECT_NE(a.log.epochs[0].val_loss, c.log.epochs[0].val_loss);
}

TEST_F(SmallFit, OptimizerOverride) {
  cfg.max_epochs = 2;
  cfg.optimizer = OptimizerKind::RMSprop;
  const auto a = fit(spec, train, val, cfg);
  cfg.optimizer = OptimizerKind::Adam;
  const auto b = fit(spec, train, val, cfg);
  EXPECT_NE(a.log.epochs[1].val_loss, b.log.epochs[1].val_loss);
}

TEST_F(SmallFit, NonFiniteLossDiverges) {
  cfg.max_epochs = 5;
  // One poisoned target makes the first epoch loss NaN.
  train.target[7] = std::numeric_limits<double>::quiet_NaN();
  try {
    fit(spec, train, val, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.code(), ErrorCode::DivergenceDetected);
    EXPECT_TRUE(e.log().epochs.empty());
  }
  SequenceData empty;
  EXPECT_THROW(fit(spec, empty, val, cfg), Error);
}

TEST(TrainLog, CsvLayout) {
  TrainLog log;
  log.epochs.push_back({1, 0.5, 0.25, 0.001});
  log.epochs.push_back({2, 0.4, 0.125, 0.0005});
  std::ostringstream out;
  write_train_log(out, log);
  EXPECT_EQ(out.str(), "epoch,train_loss,val_loss,lr\n1,0.5,0.25,0.001\n2,0.4,0.125,5e-04\n");
}

}  // namespace
}  // namespace loadcast
