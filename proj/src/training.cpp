#include "loadcast/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "loadcast/csv.hpp"

namespace loadcast {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (batch_size == 0) fail("batch_size must be positive");
  if (max_epochs <= 0) fail("max_epochs must be positive");
  if (early_stop_patience <= 0 || plateau_patience <= 0) fail("patience must be positive");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) fail("plateau_factor must be in (0, 1)");
  if (!(min_lr > 0.0)) fail("min_lr must be positive");
  if (learning_rate && !(*learning_rate > 0.0)) fail("learning_rate must be positive");
}

void write_train_log(std::ostream& out, const TrainLog& log) {
  out << "epoch,train_loss,val_loss,lr\n";
  for (const auto& e : log.epochs)
    out << e.epoch << ',' << csv::format(e.train_loss) << ',' << csv::format(e.val_loss) << ','
        << csv::format(e.lr) << '\n';
}

LossGrad mse_loss(const Vector& pred, const Vector& target) {
  if (pred.size() != target.size() || pred.size() == 0)
    throw Error(ErrorCode::ShapeMismatch, "mse_loss needs equal non-empty vectors");
  const Vector e = pred - target;
  const double n = static_cast<double>(pred.size());
  return {e.squaredNorm() / n, 2.0 * e / n};
}

namespace {
void ensure_state(const std::vector<Parameter*>& params, OptimizerState& s, bool first_moment) {
  if (s.v.size() == params.size()) return;
  s.v.clear();
  s.m.clear();
  for (const auto* p : params) {
    s.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    if (first_moment) s.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}
}  // namespace

void adam_step(const std::vector<Parameter*>& params, OptimizerState& s, double lr, double beta1, double beta2,
               double eps) {
  ensure_state(params, s, true);
  ++s.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(s.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    s.m[k] = beta1 * s.m[k] + (1.0 - beta1) * p.grad;
    s.v[k] = beta2 * s.v[k] + (1.0 - beta2) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (s.m[k].array() / c1) / ((s.v[k].array() / c2).sqrt() + eps);
  }
}

void rmsprop_step(const std::vector<Parameter*>& params, OptimizerState& s, double lr, double rho, double eps) {
  ensure_state(params, s, false);
  ++s.step;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    s.v[k] = rho * s.v[k] + (1.0 - rho) * p.grad.cwiseAbs2();
    p.value.array() -= lr * p.grad.array() / (s.v[k].array().sqrt() + eps);
  }
}

Callbacks::Callbacks(const TrainConfig& cfg, double initial_lr) : cfg_(cfg), lr_(initial_lr) {}

Callbacks::Decision Callbacks::on_epoch_end(int epoch, double val_loss) {
  Decision d;
  d.improved = val_loss < best_ - cfg_.min_delta;
  if (d.improved) {
    best_ = val_loss;
    best_epoch_ = epoch;
    plateau_wait_ = 0;
    stop_wait_ = 0;
    return d;
  }
  ++plateau_wait_;
  if (plateau_wait_ >= cfg_.plateau_patience && lr_ > cfg_.min_lr) {
    lr_ = std::max(lr_ * cfg_.plateau_factor, cfg_.min_lr);
    d.lr_reduced = true;
    plateau_wait_ = 0;
  }
  ++stop_wait_;
  d.stop = stop_wait_ >= cfg_.early_stop_patience;
  return d;
}

CallbackTrace simulate_callbacks(const std::vector<double>& losses, const TrainConfig& cfg, double initial_lr) {
  CallbackTrace t;
  Callbacks cb(cfg, initial_lr);
  for (std::size_t i = 0; i < losses.size() && static_cast<int>(i) < cfg.max_epochs; ++i) {
    const int epoch = static_cast<int>(i) + 1;
    t.lr.push_back(cb.lr());
    const auto d = cb.on_epoch_end(epoch, losses[i]);
    t.stopped_epoch = epoch;
    if (d.lr_reduced) t.lr_reductions.push_back(epoch);
    if (d.stop) break;
  }
  t.best_epoch = cb.best_epoch();
  return t;
}

Vector predict(Model& model, const SequenceData& data) {
  constexpr std::size_t kChunk = 1024;
  Vector out(static_cast<Eigen::Index>(data.size()));
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const auto end = std::min(data.size(), start + kChunk);
    rows.resize(end - start);
    std::iota(rows.begin(), rows.end(), start);
    out.segment(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(rows.size())) =
        model.forward(gather(data, rows), false);
  }
  return out;
}

double evaluate_loss(Model& model, const SequenceData& data) {
  if (data.size() == 0) throw Error(ErrorCode::EmptyPartition, "no samples to evaluate");
  return (predict(model, data) - data.target).squaredNorm() / static_cast<double>(data.size());
}

FitResult fit(const ModelSpec& spec, const SequenceData& train, const SequenceData& validation,
              const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() == 0 || validation.size() == 0) throw Error(ErrorCode::EmptyPartition, "fit needs data");
  Rng master(cfg.seed);
  FitResult res;
  res.model = std::make_unique<Model>(spec, master.fork());
  Rng shuffle_rng(master.fork());
  Rng dropout_rng(master.fork());
  auto& model = *res.model;
  const auto params = model.parameters();
  const auto kind = cfg.optimizer.value_or(spec.optimizer);
  Callbacks callbacks(cfg, cfg.learning_rate.value_or(spec.learning_rate));
  OptimizerState state;
  std::vector<Matrix> best_weights;
  auto& log = res.log;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = callbacks.lr();
    shuffle_rng.shuffle(std::span(order));
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      Vector target(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) target[static_cast<Eigen::Index>(i)] = train.target[static_cast<Eigen::Index>(rows[i])];
      model.zero_grad();
      const auto pred = model.forward(gather(train, rows), true, &dropout_rng);
      const auto lg = mse_loss(pred, target);
      if (!std::isfinite(lg.loss))
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch), log);
      loss_sum += lg.loss * static_cast<double>(rows.size());
      model.backward(lg.grad);
      if (kind == OptimizerKind::Adam) adam_step(params, state, lr, cfg.beta1, cfg.beta2, cfg.epsilon);
      else rmsprop_step(params, state, lr, cfg.rho, cfg.epsilon);
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());
    const double val_loss = evaluate_loss(model, validation);
    log.epochs.push_back({epoch, train_loss, val_loss, lr});
    if (!std::isfinite(val_loss))
      throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch), log);
    const auto d = callbacks.on_epoch_end(epoch, val_loss);
    log.stopped_epoch = epoch;
    if (d.improved) {
      best_weights.clear();
      for (const auto* p : params) best_weights.push_back(p->value);
    }
    if (d.lr_reduced) log.lr_reductions.push_back(epoch);
    if (d.stop) {
      log.early_stopped = true;
      break;
    }
  }
  log.best_epoch = callbacks.best_epoch();
  log.best_val_loss = callbacks.best();
  if (!best_weights.empty()) {
    for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best_weights[k];
    log.restored = true;
  }
  return res;
}

FitResult fit(const ModelSpec& spec, const SplitCorpus& corpus, const TrainConfig& cfg) {
  return fit(spec, to_sequence_data(corpus.train, corpus.scaler), to_sequence_data(corpus.validation, corpus.scaler),
             cfg);
}

}  // namespace loadcast
