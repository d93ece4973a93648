#include "loadcast/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "loadcast/error.hpp"

namespace loadcast::stats {

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "pearson: length mismatch");
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = x[i] - mx, b = y[i] - my;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx <= 0 || syy <= 0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<int> equal_frequency_bins(std::span<const double> x, int bins) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<int> label(n, 0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    // A run of ties takes the bin of its first rank.
    const int b = static_cast<int>((i * static_cast<std::size_t>(bins)) / n);
    for (std::size_t k = i; k < j; ++k) label[order[k]] = b;
    i = j;
  }
  return label;
}

double binned_entropy(std::span<const double> x, int bins) {
  const auto lx = equal_frequency_bins(x, bins);
  std::vector<double> p(static_cast<std::size_t>(bins), 0.0);
  for (int b : lx) p[static_cast<std::size_t>(b)] += 1.0;
  double h = 0;
  for (double c : p)
    if (c > 0) {
      const double q = c / static_cast<double>(x.size());
      h -= q * std::log(q);
    }
  return h;
}

double mutual_information(std::span<const double> x, std::span<const double> y, int bins) {
  if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "mutual_information: length mismatch");
  if (x.empty()) return 0.0;
  const auto lx = equal_frequency_bins(x, bins);
  const auto ly = equal_frequency_bins(y, bins);
  const auto B = static_cast<std::size_t>(bins);
  std::vector<double> joint(B * B, 0.0), px(B, 0.0), py(B, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto a = static_cast<std::size_t>(lx[i]), b = static_cast<std::size_t>(ly[i]);
    joint[a * B + b] += 1.0;
    px[a] += 1.0;
    py[b] += 1.0;
  }
  const double n = static_cast<double>(x.size());
  double mi = 0;
  for (std::size_t a = 0; a < B; ++a)
    for (std::size_t b = 0; b < B; ++b) {
      const double c = joint[a * B + b];
      if (c > 0) mi += (c / n) * std::log(c * n / (px[a] * py[b]));
    }
  return std::max(0.0, mi);
}

double r2_score(std::span<const double> actual, std::span<const double> predicted) {
  const double m = mean(actual);
  double sse = 0, sst = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    sse += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    sst += (actual[i] - m) * (actual[i] - m);
  }
  if (sst <= 0) return std::numeric_limits<double>::quiet_NaN();
  return 1.0 - sse / sst;
}

std::vector<double> LinearModel::predict(const Matrix& x) const {
  Vector yhat = x * coef;
  std::vector<double> out(static_cast<std::size_t>(yhat.size()));
  for (Eigen::Index i = 0; i < yhat.size(); ++i) out[static_cast<std::size_t>(i)] = yhat[i] + intercept;
  return out;
}

namespace {
struct Centered {
  Eigen::MatrixXd x;
  Vector y;
  RowVector x_mean;
  double y_mean;
};

Centered center(const Matrix& x, std::span<const double> y) {
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw Error(ErrorCode::ShapeMismatch, "design rows do not match target length");
  Centered c;
  c.x_mean = x.colwise().mean();
  c.x = x.rowwise() - c.x_mean;
  c.y = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
  c.y_mean = c.y.mean();
  c.y.array() -= c.y_mean;
  return c;
}

LinearModel solve_ridge(const Centered& c, double lambda) {
  const auto p = c.x.cols();
  Eigen::MatrixXd gram = c.x.transpose() * c.x;
  gram.diagonal().array() += lambda;
  LinearModel m;
  m.coef = gram.ldlt().solve(c.x.transpose() * c.y);
  m.intercept = c.y_mean - (c.x_mean * m.coef)(0);
  if (p == 0) m.intercept = c.y_mean;
  return m;
}
}  // namespace

LinearModel ridge_fit(const Matrix& x, std::span<const double> y, double lambda) {
  return solve_ridge(center(x, y), lambda);
}

LinearModel least_squares_fit(const Matrix& x, std::span<const double> y) {
  const auto c = center(x, y);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(c.x);
  qr.setThreshold(1e-10);
  if (qr.rank() < c.x.cols()) {
    auto m = solve_ridge(c, 1e-8);
    m.singular_fallback = true;
    return m;
  }
  LinearModel m;
  m.coef = qr.solve(c.y);
  m.intercept = c.y_mean - (c.x_mean * m.coef)(0);
  return m;
}

std::vector<double> variance_inflation(const Matrix& x) {
  const auto p = x.cols();
  Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd cov = centered.transpose() * centered;
  std::vector<double> out(static_cast<std::size_t>(p), 1.0);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double var_j = cov(j, j);
    if (var_j <= 0) {
      out[static_cast<std::size_t>(j)] = kVifCap;
      continue;
    }
    if (p == 1) continue;
    std::vector<Eigen::Index> others;
    for (Eigen::Index k = 0; k < p; ++k)
      if (k != j) others.push_back(k);
    const auto m = static_cast<Eigen::Index>(others.size());
    Eigen::MatrixXd a(m, m);
    Vector b(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      b[r] = cov(others[static_cast<std::size_t>(r)], j);
      for (Eigen::Index c = 0; c < m; ++c)
        a(r, c) = cov(others[static_cast<std::size_t>(r)], others[static_cast<std::size_t>(c)]);
    }
    a.diagonal().array() += 1e-8;
    const Vector beta = a.ldlt().solve(b);
    const double r2 = std::clamp(b.dot(beta) / var_j, 0.0, 1.0);
    out[static_cast<std::size_t>(j)] = r2 >= 1.0 - 1e-6 ? kVifCap : 1.0 / (1.0 - r2);
  }
  return out;
}

}  // namespace loadcast::stats
