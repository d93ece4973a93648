#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "loadcast/error.hpp"
#include "loadcast/model.hpp"

namespace loadcast {

struct TrainConfig {
  std::size_t batch_size = 32;
  int max_epochs = 100;
  int early_stop_patience = 5;
  int plateau_patience = 3;
  double plateau_factor = 0.5;
  double min_lr = 1e-5;
  double min_delta = 1e-7;  // an epoch improves when val loss drops by more than this
  std::optional<OptimizerKind> optimizer;  // overrides the spec when set
  std::optional<double> learning_rate;     // overrides the spec when set
  double beta1 = 0.9;
  double beta2 = 0.999;
  double rho = 0.9;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;  // InvalidConfig
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  double lr = 0;  // rate used during this epoch
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<int> lr_reductions;  // epochs at whose end the rate was reduced
  int stopped_epoch = 0;           // last epoch run
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool early_stopped = false;
  bool restored = false;
};
void write_train_log(std::ostream& out, const TrainLog& log);

struct LossGrad {
  double loss;
  Vector grad;  // d loss / d pred
};
LossGrad mse_loss(const Vector& pred, const Vector& target);

struct OptimizerState {
  std::vector<Matrix> m;  // first moment (Adam only)
  std::vector<Matrix> v;  // second moment / mean square
  long step = 0;
};
void adam_step(const std::vector<Parameter*>& params, OptimizerState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);
void rmsprop_step(const std::vector<Parameter*>& params, OptimizerState& state, double lr, double rho = 0.9,
                  double eps = 1e-8);

// Plateau and early-stopping callbacks evaluated at each epoch end, plateau
// first. Both share one improvement rule and one best value.
class Callbacks {
 public:
  struct Decision {
    bool improved = false;
    bool lr_reduced = false;
    bool stop = false;
  };

  Callbacks(const TrainConfig& cfg, double initial_lr);
  Decision on_epoch_end(int epoch, double val_loss);
  double lr() const { return lr_; }
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  TrainConfig cfg_;
  double lr_;
  double best_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int plateau_wait_ = 0;
  int stop_wait_ = 0;
};

// Replays a scripted validation-loss sequence through the callbacks.
struct CallbackTrace {
  std::vector<double> lr;          // rate used in each epoch
  std::vector<int> lr_reductions;
  int stopped_epoch = 0;
  int best_epoch = 0;
};
CallbackTrace simulate_callbacks(const std::vector<double>& val_losses, const TrainConfig& cfg, double initial_lr);

// Carries the log up to the failing epoch.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, TrainLog log)
      : Error(ErrorCode::DivergenceDetected, msg), log_(std::move(log)) {}
  const TrainLog& log() const { return log_; }

 private:
  TrainLog log_;
};

struct FitResult {
  std::unique_ptr<Model> model;
  TrainLog log;
};

// Mean MSE in standardized units over a partition, inference mode.
double evaluate_loss(Model& model, const SequenceData& data);
Vector predict(Model& model, const SequenceData& data);

FitResult fit(const ModelSpec& spec, const SequenceData& train, const SequenceData& validation,
              const TrainConfig& cfg);
FitResult fit(const ModelSpec& spec, const SplitCorpus& corpus, const TrainConfig& cfg);

}  // namespace loadcast
