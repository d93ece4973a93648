#include <cmath>
#include <limits>
#include <ostream>

#include "loadcast/csv.hpp"
#include "loadcast/error.hpp"
#include "loadcast/evaluation.hpp"

namespace loadcast {

bool MetricSet::mase_defined() const { return !std::isnan(mase); }
bool MetricSet::r2_defined() const { return !std::isnan(r2); }

MetricSet compute_metrics(std::span<const double> pred, std::span<const double> actual,
                          std::span<const double> naive) {
  if (pred.size() != actual.size() || naive.size() != actual.size())
    throw Error(ErrorCode::ShapeMismatch, "metric inputs differ in length");
  if (actual.empty()) throw Error(ErrorCode::ShapeMismatch, "metrics need at least one sample");
  MetricSet m;
  m.n = actual.size();
  const double n = static_cast<double>(m.n);
  double abs_sum = 0, sq_sum = 0, naive_abs = 0, pct_sum = 0, mean = 0;
  std::size_t pct_n = 0;
  for (std::size_t i = 0; i < m.n; ++i) mean += actual[i];
  mean /= n;
  double sst = 0;
  for (std::size_t i = 0; i < m.n; ++i) {
    const double e = pred[i] - actual[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    naive_abs += std::abs(naive[i] - actual[i]);
    sst += (actual[i] - mean) * (actual[i] - mean);
    if (std::abs(actual[i]) > kMapeFloor) {
      pct_sum += std::abs(e) / std::abs(actual[i]);
      ++pct_n;
    }
  }
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  m.mae = abs_sum / n;
  m.mse = sq_sum / n;
  m.rmse = std::sqrt(m.mse);
  m.mape_excluded = m.n - pct_n;
  m.mape = pct_n > 0 ? 100.0 * pct_sum / static_cast<double>(pct_n) : nan;
  m.mase = naive_abs > 0 ? m.mae / (naive_abs / n) : nan;
  m.r2 = sst > 0 ? 1.0 - sq_sum / sst : nan;
  return m;
}

MetricSet compute_metrics(std::span<const Prediction> predictions) {
  std::vector<double> p, a, z;
  for (const auto& x : predictions) {
    p.push_back(x.predicted);
    a.push_back(x.actual);
    z.push_back(x.naive);
  }
  return compute_metrics(p, a, z);
}

std::vector<Prediction> predict_samples(Model& model, const std::vector<SequenceSample>& samples,
                                        const Scaler& scaler) {
  std::vector<Prediction> out;
  if (samples.empty()) return out;
  const auto data = to_sequence_data(samples, scaler);
  const Vector z = predict(model, data);
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    out.push_back({s.route_id, s.flight_date, s.days_before_departure, s.target_plf, s.naive_plf,
                   scaler.unscale_target(z[static_cast<Eigen::Index>(i)])});
  }
  return out;
}

LeaderboardRow summarize(const std::string& model, const std::vector<MetricSet>& runs) {
  LeaderboardRow row;
  row.model = model;
  row.seeds = runs.size();
  if (runs.empty()) return row;
  const double k = static_cast<double>(runs.size());
  auto stat = [&](auto field, double& mean, double& sd) {
    mean = 0;
    for (const auto& r : runs) mean += r.*field;
    mean /= k;
    double var = 0;
    for (const auto& r : runs) var += (r.*field - mean) * (r.*field - mean);
    sd = std::sqrt(var / k);
  };
  stat(&MetricSet::mae, row.mean.mae, row.std.mae);
  stat(&MetricSet::mape, row.mean.mape, row.std.mape);
  stat(&MetricSet::mse, row.mean.mse, row.std.mse);
  stat(&MetricSet::rmse, row.mean.rmse, row.std.rmse);
  stat(&MetricSet::mase, row.mean.mase, row.std.mase);
  stat(&MetricSet::r2, row.mean.r2, row.std.r2);
  row.mean.n = runs.front().n;
  row.mean.mape_excluded = runs.front().mape_excluded;
  return row;
}

void write_leaderboard_csv(std::ostream& out, const std::vector<LeaderboardRow>& rows) {
  out << "model,seeds,n,mae_mean,mae_std,mape_mean,mape_std,mse_mean,mse_std,rmse_mean,rmse_std,"
         "mase_mean,mase_std,r2_mean,r2_std,mape_excluded\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r.seeds << ',' << r.mean.n;
    for (auto field : {&MetricSet::mae, &MetricSet::mape, &MetricSet::mse, &MetricSet::rmse, &MetricSet::mase,
                       &MetricSet::r2})
      out << ',' << csv::format(r.mean.*field) << ',' << csv::format(r.std.*field);
    out << ',' << r.mean.mape_excluded << '\n';
  }
}

}  // namespace loadcast
