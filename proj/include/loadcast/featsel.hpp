#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadcast/features.hpp"
#include "loadcast/forest.hpp"
#include "loadcast/sequences.hpp"
#include "loadcast/tensor.hpp"

namespace loadcast::featsel {

// Candidate columns carry a temporal suffix: `<base>_H<k>` is the horizontal
// snapshot k-1 days before the prediction day (H1 = the prediction day
// itself), `<base>_V<k>` the k-th most recent historical flight at the same
// offset (V1 = most recent).
struct Dataset {
  std::vector<std::string> names;
  Matrix x;               // rows in chronological order
  std::vector<double> y;  // departure PLF
};

struct SuffixedName {
  std::string base;
  char stream = 0;  // 'H', 'V' or 0 when unsuffixed
  int offset = 0;
};
SuffixedName parse_suffix(const std::string& name);

// Lagged candidate matrices for both streams over the same sample rows.
struct SelectionData {
  Dataset horizontal;
  Dataset vertical;
};
SelectionData make_selection_data(const FeatureTable& table, const SequenceConfig& sequences,
                                  std::size_t max_rows);

// Lower value = more domain-relevant. Shared-core features first, then the
// remaining published inputs, then companions; unknown names last. Within a
// base, the more recent temporal variant ranks first.
struct Priority {
  int tier;
  std::size_t order;
  int offset;
  friend auto operator<=>(const Priority&, const Priority&) = default;
};
Priority domain_priority(const std::string& name);
bool is_shared_core(const std::string& base);
const std::vector<std::string>& shared_core();

struct DroppedFeature {
  std::string name;
  int stage;
  std::string rule;
};

struct CorrelatedPair {
  std::string kept;
  std::string dropped;  // empty when both were retained as shared core
  double r;
};

struct Stage1Result {
  std::vector<std::string> survivors;
  std::vector<CorrelatedPair> pairs;
  std::vector<DroppedFeature> dropped;
  Matrix correlation;  // over the input columns, NaN for constant columns
};
Stage1Result stage1_pearson_prune(const Dataset& data, double threshold = 0.90);

std::map<std::string, double> stage2_mutual_information(const Dataset& data, int bins = 16);

std::map<std::string, double> stage3_rf_importance(const Dataset& data, const ForestConfig& forest);

struct SfsStep {
  std::string feature;
  double validation_r2;
};
struct SfsResult {
  std::vector<SfsStep> order;
  std::string stop_reason;
};
// Greedy forward selection against closed-form ridge, scored by R^2 on a
// trailing chronological holdout.
SfsResult stage4_sfs_ridge(const Dataset& data, std::size_t max_k = 20, double lambda = 1.0,
                           double min_gain = 1e-4, double holdout = 0.2);

std::map<std::string, double> stage5_vif(const Dataset& data);

struct DedupEntry {
  std::string base;
  std::string variant;  // the kept suffixed name
  int votes;
};
// Strips suffixes; keeps the most frequent variant per base, ties broken by
// smaller offset then H before V. First-seen order of bases is preserved.
std::vector<DedupEntry> stage6_dedup(const std::vector<std::string>& selected);

// Borda count over rankings (each a best-first list of names). Names missing
// from a ranking share its last place. Ties broken by domain priority.
std::vector<std::string> borda_aggregate(const std::vector<std::string>& candidates,
                                         const std::vector<std::vector<std::string>>& rankings);

struct FinalSplit {
  std::vector<std::string> horizontal;
  std::vector<std::string> vertical;
  std::vector<std::string> warnings;
};
FinalSplit stage7_final_split(const std::vector<std::string>& ranked_bases, std::size_t horizontal_target = 8,
                              std::size_t vertical_target = 9);

struct Config {
  double pearson_threshold = 0.90;
  int mi_bins = 16;
  double mi_min = 0.005;        // stage 2 drops columns below this (nats)
  double rf_min = 0.001;        // stage 3 drops columns below this importance
  ForestConfig forest{};
  std::size_t sfs_max_k = 20;
  double ridge_lambda = 1.0;
  double sfs_min_gain = 1e-4;
  double sfs_holdout = 0.2;
  std::size_t max_rows = 6000;
  std::size_t horizontal_target = 8;
  std::size_t vertical_target = 9;
};

struct PoolReport {
  std::string pool;  // "horizontal" | "vertical"
  std::map<int, std::vector<std::string>> stage_inputs;
  std::map<int, std::vector<std::string>> stage_outputs;
  std::vector<std::string> pearson_names;
  Matrix pearson;
  std::vector<CorrelatedPair> correlated_pairs;
  std::map<std::string, double> mi_scores;
  std::map<std::string, double> rf_importances;
  SfsResult sfs;
  std::map<std::string, double> vif_values;
  std::vector<DroppedFeature> dropped;
};

struct SelectionReport {
  PoolReport horizontal;
  PoolReport vertical;
  std::vector<std::string> stage6_input;
  std::vector<DedupEntry> stage6_output;
  std::vector<std::string> stage7_ranking;
  std::vector<std::string> final_horizontal;
  std::vector<std::string> final_vertical;
  std::vector<std::string> warnings;
  int last_stage = 7;
};

// Runs stages 1..last_stage. Pure function of (data, config).
SelectionReport run_pipeline(const SelectionData& data, const Config& config, int last_stage = 7);

void write_report_json(std::ostream& out, const SelectionReport& report);

// Maps final base names back to Feature columns (unknown names are skipped).
std::vector<Feature> to_features(const std::vector<std::string>& bases);

}  // namespace loadcast::featsel
