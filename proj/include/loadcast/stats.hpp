#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "loadcast/tensor.hpp"

namespace loadcast::stats {

double mean(std::span<const double> x);

// Pearson correlation; NaN when either column is constant.
double pearson(std::span<const double> x, std::span<const double> y);

// Equal-frequency bin labels in [0, bins). Equal values share a bin.
std::vector<int> equal_frequency_bins(std::span<const double> x, int bins);

// Plug-in mutual information (nats) between equal-frequency binnings.
double mutual_information(std::span<const double> x, std::span<const double> y, int bins = 16);

// Plug-in entropy (nats) of the equal-frequency binning of x.
double binned_entropy(std::span<const double> x, int bins = 16);

double r2_score(std::span<const double> actual, std::span<const double> predicted);

struct LinearModel {
  Vector coef;
  double intercept = 0;
  bool singular_fallback = false;  // plain least squares fell back to a tiny ridge

  std::vector<double> predict(const Matrix& x) const;
};

// Closed-form ridge with an unpenalised intercept.
LinearModel ridge_fit(const Matrix& x, std::span<const double> y, double lambda);

// Ordinary least squares; on a rank-deficient design it falls back to ridge
// with lambda 1e-8 and sets singular_fallback.
LinearModel least_squares_fit(const Matrix& x, std::span<const double> y);

inline constexpr double kVifCap = 1e6;

// VIF_j = 1 / (1 - R^2_j), regressing column j on all others (ridge 1e-8),
// capped at kVifCap once R^2_j >= 1 - 1e-6.
std::vector<double> variance_inflation(const Matrix& x);

}  // namespace loadcast::stats
