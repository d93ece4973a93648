#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadcast/forest.hpp"
#include "loadcast/ingest.hpp"
#include "loadcast/model.hpp"
#include "loadcast/training.hpp"

namespace loadcast {

inline constexpr double kMapeFloor = 1e-6;

struct MetricSet {
  double mae = 0;
  double mape = 0;  // percent, over actuals with |a| > kMapeFloor
  double mse = 0;
  double rmse = 0;
  double mase = 0;  // NaN when the naive MAE is zero
  double r2 = 0;    // NaN when the actuals are constant
  std::size_t n = 0;
  std::size_t mape_excluded = 0;

  bool mase_defined() const;
  bool r2_defined() const;
};

// MASE divides by the MAE of `naive` (persistence from the newest horizontal
// snapshot) on the same samples.
MetricSet compute_metrics(std::span<const double> pred, std::span<const double> actual,
                          std::span<const double> naive);

// One forecast in PLF points.
struct Prediction {
  std::string route_id;
  Date flight_date;
  int d = 0;
  double actual = 0;
  double naive = 0;
  double predicted = 0;
};
MetricSet compute_metrics(std::span<const Prediction> predictions);

// Inference-mode forecasts for raw-scale targets; `samples` must already be
// standardized with `scaler`.
std::vector<Prediction> predict_samples(Model& model, const std::vector<SequenceSample>& samples,
                                        const Scaler& scaler);

using ModelPredictions = std::map<std::string, std::vector<Prediction>>;

struct HorizonCell {
  std::string model;
  int d = 0;
  std::size_t n = 0;
  std::optional<MetricSet> metrics;  // empty when no sample has this d
};
struct HorizonReport {
  int min_d = 0;
  int max_d = 21;
  std::vector<HorizonCell> cells;  // ordered by (model, d)
  const HorizonCell* find(const std::string& model, int d) const;
};
HorizonReport horizon_analysis(const ModelPredictions& models, int min_d = 0, int max_d = 21);
void write_horizon_csv(std::ostream& out, const HorizonReport& report);
// `metric` is "mae" or "r2".
void write_horizon_svg(std::ostream& out, const HorizonReport& report, const std::string& metric);

struct CategoryCell {
  std::string pair;  // reach | service | frequency | haul
  std::string tag;
  std::string model;
  std::size_t n = 0;
  std::optional<MetricSet> metrics;
};
std::vector<CategoryCell> category_report(const ModelPredictions& models, const std::vector<RouteMeta>& routes);
void write_categories_csv(std::ostream& out, const std::vector<CategoryCell>& cells);
void write_categories_svg(std::ostream& out, const std::vector<CategoryCell>& cells, const std::string& metric);

// Non-sequential baselines over flattened windows (H*F_h + V*F_v columns).
enum class BaselineKind { Linear, Ridge, RandomForest, Naive };
std::string to_string(BaselineKind k);
BaselineKind baseline_from_name(const std::string& name);

Matrix flatten(const std::vector<SequenceSample>& samples);

struct BaselineConfig {
  double ridge_lambda = 1.0;
  ForestConfig forest{};
};
struct BaselineResult {
  std::vector<Prediction> predictions;  // on the test partition
  MetricSet metrics;
  std::vector<std::string> warnings;
};
BaselineResult baseline_fit_predict(BaselineKind kind, const SplitCorpus& corpus, const BaselineConfig& cfg = {},
                                    std::uint64_t seed = 0);

// Mean and population standard deviation of each metric over seeds.
struct LeaderboardRow {
  std::string model;
  std::size_t seeds = 0;
  MetricSet mean;
  MetricSet std;
};
LeaderboardRow summarize(const std::string& model, const std::vector<MetricSet>& runs);
void write_leaderboard_csv(std::ostream& out, const std::vector<LeaderboardRow>& rows);

struct LeaderboardConfig {
  std::vector<Variant> variants;
  std::vector<BaselineKind> baselines;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  TrainConfig train{};
  BaselineConfig baseline{};
  unsigned jobs = 1;
  // Called with (model, seed, fitted model, log) after each neural fit.
  std::function<void(const std::string&, std::uint64_t, Model&, const TrainLog&)> on_fit;
};
struct LeaderboardResult {
  std::vector<LeaderboardRow> rows;
  std::map<std::string, std::vector<MetricSet>> runs;                    // per model, seed order
  std::map<std::string, std::vector<std::vector<Prediction>>> predictions;  // per model, seed order
};
LeaderboardResult leaderboard(const SplitCorpus& corpus, const LeaderboardConfig& cfg);

struct SweepRow {
  std::string architecture;
  int horizontal_window = 0;
  int vertical_window = 0;
  double val_loss = 0;      // best standardized validation MSE
  double val_mse_plf = 0;   // same in PLF points squared
  int epochs = 0;
  std::size_t samples = 0;
};
struct SweepConfig {
  std::vector<int> sizes{3, 6, 9, 12, 15, 18};
  bool symmetric = true;  // only (k, k) pairs when set, otherwise the full grid
  std::vector<Variant> architectures{Variant::SlstmH, Variant::SlstmV, Variant::SlstmC, Variant::Dlstm};
  SequenceConfig sequences{};
  TrainConfig train{};
  unsigned jobs = 1;
};
std::vector<SweepRow> window_sweep(const FeatureTable& table, const SweepConfig& cfg);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
// Lowest val_mse_plf over all rows (earlier row on ties); throws
// EmptyPartition when there are no rows.
const SweepRow& sweep_winner(const std::vector<SweepRow>& rows);
// sequences.horizontal_window / sequences.vertical_window of `row`, loadable
// through --config.
KeyValueConfig winner_config(const SweepRow& row);

// Runs tasks on up to `jobs` threads; results keep task order.
void run_parallel(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& task);

}  // namespace loadcast
