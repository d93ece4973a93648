#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "loadcast/tensor.hpp"

namespace loadcast {

struct ForestConfig {
  int trees = 100;
  int max_depth = 12;
  bool bootstrap = true;
  int max_features = 0;  // features tried per split; 0 = floor(sqrt(F))
  int min_samples_split = 2;
  std::uint64_t seed = 0;
};

struct TreeBuilder;

// CART regression tree with variance impurity.
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    int left = -1;
    int right = -1;
    double value = 0;
  };

  double predict(const double* row) const;
  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  friend class RandomForest;
  friend struct TreeBuilder;
  std::vector<Node> nodes_;
};

class RandomForest {
 public:
  explicit RandomForest(ForestConfig config = {}) : config_(config) {}

  void fit(const Matrix& x, std::span<const double> y);
  std::vector<double> predict(const Matrix& x) const;

  // Mean impurity decrease per feature, normalised to sum 1. All zeros when no
  // tree ever split.
  const std::vector<double>& importances() const { return importances_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }

 private:
  ForestConfig config_;
  std::vector<RegressionTree> trees_;
  std::vector<double> importances_;
};

}  // namespace loadcast
