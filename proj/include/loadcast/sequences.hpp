#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "loadcast/calendar.hpp"
#include "loadcast/features.hpp"
#include "loadcast/tensor.hpp"

namespace loadcast {

struct SequenceSample {
  std::string route_id;
  Date flight_date;
  int days_before_departure = 0;
  Tensor horizontal;  // H x F_h, oldest snapshot first
  Tensor vertical;    // V x F_v, oldest historical flight first
  double target_plf = 0;  // PLF at departure (d = 0)
  double naive_plf = 0;   // persistence forecast: PLF of the newest horizontal snapshot
};

// Route -> flight date -> row index per days-before-departure (-1 if absent).
class FlightIndex {
 public:
  static constexpr int kMaxOffset = 30;
  using Offsets = std::array<long, kMaxOffset + 1>;

  explicit FlightIndex(const FeatureTable& table);

  const FeatureTable& table() const { return *table_; }
  const std::map<Date, Offsets>* route(const std::string& route_id) const;
  const Offsets* flight(const std::string& route_id, const Date& flight_date) const;
  std::vector<std::string> routes() const;

 private:
  const FeatureTable* table_;
  std::map<std::string, std::map<Date, Offsets>> index_;
};

struct SequenceConfig {
  int horizontal_window = 3;
  int vertical_window = 3;
  int stride = 1;  // 1 = most recent flights; >1 = strided history
  int min_offset = 0;
  int max_offset = 21;
  std::vector<Feature> horizontal_features = default_horizontal_features();
  std::vector<Feature> vertical_features = default_vertical_features();
};

// Rows of one flight at offsets d+H-1 .. d, oldest first.
Tensor build_horizontal(const FlightIndex& index, const std::string& route_id, const Date& flight_date,
                        int d, int window, const std::vector<Feature>& features);

// Flight dates chosen for the vertical window, oldest first.
std::vector<Date> vertical_flights(const FlightIndex& index, const std::string& route_id,
                                   const Date& flight_date, int d, int window, int stride);

Tensor build_vertical(const FlightIndex& index, const std::string& route_id, const Date& flight_date,
                      int d, int window, int stride, const std::vector<Feature>& features);

struct SkipCounts {
  std::size_t insufficient_horizontal = 0;
  std::size_t insufficient_vertical = 0;
  std::size_t missing_target = 0;
  std::size_t total() const { return insufficient_horizontal + insufficient_vertical + missing_target; }
};

struct SampleSet {
  std::vector<SequenceSample> samples;  // ordered by (route, flight_date, d descending)
  SkipCounts skipped;
};

SampleSet assemble_samples(const FeatureTable& table, const SequenceConfig& config = {});

// Per-column mean and population standard deviation.
struct ColumnScaler {
  std::vector<double> mean;
  std::vector<double> std;

  void transform(Tensor& t) const;
  void inverse(Tensor& t) const;
};

struct Scaler {
  ColumnScaler horizontal;
  ColumnScaler vertical;
  double target_mean = 0;
  double target_std = 1;

  double scale_target(double plf) const { return (plf - target_mean) / target_std; }
  double unscale_target(double z) const { return z * target_std + target_mean; }
  void transform(SequenceSample& s) const;
  void inverse(SequenceSample& s) const;
};

Scaler fit_scaler(const std::vector<SequenceSample>& train);

enum class Partition { Train, Validation, Test };
std::string to_string(Partition p);

struct SplitCorpus {
  std::vector<SequenceSample> train;
  std::vector<SequenceSample> validation;
  std::vector<SequenceSample> test;
  Scaler scaler;
  bool standardized = false;
};

struct SplitRatios {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

// Chronological split by flight date; samples on a boundary date all go to
// the earlier partition. When `standardize` is set the scaler fitted on
// train is applied to every partition (targets stay in PLF points; the
// scaler carries their statistics separately).
SplitCorpus chronological_split(std::vector<SequenceSample> samples, SplitRatios ratios = {},
                                bool standardize = true);

// Manifest: one line per sample with its partition; skip counts alongside.
void write_manifest(std::ostream& out, const SplitCorpus& corpus);
void write_skip_counts(std::ostream& out, const SkipCounts& skipped);

// Binary sample cache, little-endian:
//   magic "LCSAMPv1" | u64 count | u32 H | u32 Fh | u32 V | u32 Fv
//   per sample: u8 partition | u32 route length | route bytes | i64 flight date
//   (days since 1970-01-01) | i32 d | f64 target | f64 naive | H*Fh f64 | V*Fv f64
//   trailer: scaler as u8 flag | Fh means | Fh stds | Fv means | Fv stds | f64 target mean | f64 target std
void write_sample_cache(const std::filesystem::path& path, const SplitCorpus& corpus);
SplitCorpus read_sample_cache(const std::filesystem::path& path);

}  // namespace loadcast
