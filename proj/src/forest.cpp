#include "loadcast/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "loadcast/error.hpp"
#include "loadcast/random.hpp"

namespace loadcast {

double RegressionTree::predict(const double* row) const {
  int n = 0;
  while (nodes_[static_cast<std::size_t>(n)].feature >= 0) {
    const auto& node = nodes_[static_cast<std::size_t>(n)];
    n = row[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes_[static_cast<std::size_t>(n)].value;
}

struct TreeBuilder {
  const Matrix& x;
  std::span<const double> y;
  const ForestConfig& cfg;
  int mtry;
  Rng& rng;
  RegressionTree& tree;
  std::vector<double>& importance;  // unnormalised, this tree
  std::vector<std::size_t> scratch;

  int grow(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, int depth) {
    const auto n = hi - lo;
    double sum = 0, sq = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      sum += y[idx[i]];
      sq += y[idx[i]] * y[idx[i]];
    }
    const double node_sse = std::max(0.0, sq - sum * sum / static_cast<double>(n));
    const int id = static_cast<int>(tree.nodes_.size());
    tree.nodes_.push_back({-1, 0.0, -1, -1, sum / static_cast<double>(n)});
    if (depth >= cfg.max_depth || static_cast<int>(n) < cfg.min_samples_split || node_sse <= 1e-12) return id;

    // Sample mtry distinct features (partial Fisher-Yates).
    const auto F = static_cast<std::size_t>(x.cols());
    std::vector<std::size_t> feats(F);
    std::iota(feats.begin(), feats.end(), std::size_t{0});
    for (std::size_t k = 0; k < static_cast<std::size_t>(mtry); ++k) {
      const auto j = k + static_cast<std::size_t>(rng.below(F - k));
      std::swap(feats[k], feats[j]);
    }

    int best_feature = -1;
    double best_threshold = 0, best_child_sse = node_sse;
    scratch.assign(idx.begin() + static_cast<std::ptrdiff_t>(lo), idx.begin() + static_cast<std::ptrdiff_t>(hi));
    for (std::size_t k = 0; k < static_cast<std::size_t>(mtry); ++k) {
      const auto f = static_cast<Eigen::Index>(feats[k]);
      std::sort(scratch.begin(), scratch.end(), [&](auto a, auto b) {
        const double xa = x(static_cast<Eigen::Index>(a), f), xb = x(static_cast<Eigen::Index>(b), f);
        return xa < xb || (xa == xb && a < b);
      });
      double ls = 0, lq = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const double v = y[scratch[i]];
        ls += v;
        lq += v * v;
        const double xi = x(static_cast<Eigen::Index>(scratch[i]), f);
        const double xn = x(static_cast<Eigen::Index>(scratch[i + 1]), f);
        if (xi == xn) continue;
        const auto nl = static_cast<double>(i + 1), nr = static_cast<double>(n - i - 1);
        const double rs = sum - ls, rq = sq - lq;
        const double child = (lq - ls * ls / nl) + (rq - rs * rs / nr);
        if (child < best_child_sse - 1e-12) {
          best_child_sse = child;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (xi + xn);
        }
      }
    }
    if (best_feature < 0) return id;

    const auto f = static_cast<Eigen::Index>(best_feature);
    auto mid = std::stable_partition(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                     idx.begin() + static_cast<std::ptrdiff_t>(hi),
                                     [&](auto r) { return x(static_cast<Eigen::Index>(r), f) <= best_threshold; });
    const auto split = static_cast<std::size_t>(mid - idx.begin());
    importance[static_cast<std::size_t>(best_feature)] += std::max(0.0, node_sse - best_child_sse);

    tree.nodes_[static_cast<std::size_t>(id)].feature = best_feature;
    tree.nodes_[static_cast<std::size_t>(id)].threshold = best_threshold;
    const int left = grow(idx, lo, split, depth + 1);
    const int right = grow(idx, split, hi, depth + 1);
    tree.nodes_[static_cast<std::size_t>(id)].left = left;
    tree.nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }
};

void RandomForest::fit(const Matrix& x, std::span<const double> y) {
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.empty())
    throw Error(ErrorCode::ShapeMismatch, "forest: design rows do not match target length");
  const auto F = static_cast<int>(x.cols());
  int mtry = config_.max_features > 0 ? config_.max_features
                                      : static_cast<int>(std::floor(std::sqrt(static_cast<double>(F))));
  mtry = std::clamp(mtry, 1, F);

  Rng rng(config_.seed);
  trees_.assign(static_cast<std::size_t>(config_.trees), RegressionTree{});
  importances_.assign(static_cast<std::size_t>(F), 0.0);
  const std::size_t n = y.size();
  for (auto& tree : trees_) {
    Rng tree_rng(rng.fork());
    std::vector<std::size_t> idx(n);
    if (config_.bootstrap) {
      for (auto& i : idx) i = static_cast<std::size_t>(tree_rng.below(n));
    } else {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
    }
    std::vector<double> imp(static_cast<std::size_t>(F), 0.0);
    TreeBuilder b{x, y, config_, mtry, tree_rng, tree, imp, {}};
    b.grow(idx, 0, n, 0);
    const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (total > 0)
      for (int f = 0; f < F; ++f) importances_[static_cast<std::size_t>(f)] += imp[static_cast<std::size_t>(f)] / total;
  }
  const double total = std::accumulate(importances_.begin(), importances_.end(), 0.0);
  if (total > 0)
    for (auto& v : importances_) v /= total;
}

std::vector<double> RandomForest::predict(const Matrix& x) const {
  std::vector<double> out(static_cast<std::size_t>(x.rows()), 0.0);
  if (trees_.empty()) return out;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double* row = x.data() + r * x.cols();
    double s = 0;
    for (const auto& t : trees_) s += t.predict(row);
    out[static_cast<std::size_t>(r)] = s / static_cast<double>(trees_.size());
  }
  return out;
}

}  // namespace loadcast
