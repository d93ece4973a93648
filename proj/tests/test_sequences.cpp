#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "loadcast/error.hpp"
#include "loadcast/random.hpp"
#include "loadcast/sequences.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace loadcast {
namespace {

// Every value encodes its origin so copied rows can be traced back.
double stamp(const Date& flight, int d, std::size_t column) {
  return static_cast<double>(flight.serial() % 100000) + d / 100.0 + static_cast<double>(column) / 1e5;
}

FeatureRow make_row(const std::string& route, const Date& flight, int d) {
  FeatureRow r;
  r.route_id = route;
  r.flight_date = flight;
  r.record_date = flight - d;
  r.days_before_departure = d;
  for (std::size_t c = 0; c < kFeatureCount; ++c) r.values[c] = stamp(flight, d, c);
  r[Feature::days_before_departure] = d;
  return r;
}

void add_flight(FeatureTable& t, const std::string& route, const Date& flight, int max_d = 25) {
  for (int d = max_d; d >= 0; --d) t.rows.push_back(make_row(route, flight, d));
}

// Up to 200 flights over a few routes, irregular dates, random missing offsets.
FeatureTable random_table(Rng& rng) {
  FeatureTable t;
  const int routes = 1 + static_cast<int>(rng.below(3));
  const int flights = (20 + static_cast<int>(rng.below(181))) / routes;
  for (int r = 0; r < routes; ++r) {
    const std::string route = "R" + std::to_string(r);
    Date date(2023, 1, 1);
    for (int f = 0; f < flights; ++f) {
      date = date + 1 + static_cast<int>(rng.below(3));
      for (int d = 25; d >= 0; --d)
        if (rng.uniform() < 0.9) t.rows.push_back(make_row(route, date, d));
    }
  }
  return t;
}

TEST(BuildHorizontal, RowsRunOldestToNewest) {
  FeatureTable t;
  const Date flight(2024, 3, 10);
  add_flight(t, "AAA-BBB", flight);
  const FlightIndex idx(t);
  const std::vector<Feature> cols{Feature::plf};
  const Tensor h = build_horizontal(idx, "AAA-BBB", flight, 5, 3, cols);
  ASSERT_EQ(h.dim(0), 3u);
  EXPECT_DOUBLE_EQ(h.at(0, 0), stamp(flight, 7, 0));
  EXPECT_DOUBLE_EQ(h.at(1, 0), stamp(flight, 6, 0));
  EXPECT_DOUBLE_EQ(h.at(2, 0), stamp(flight, 5, 0));
}

TEST(BuildHorizontal, WindowOfOneIsTheRowAtD) {
  FeatureTable t;
  const Date flight(2024, 3, 10);
  add_flight(t, "AAA-BBB", flight);
  const FlightIndex idx(t);
  const Tensor h = build_horizontal(idx, "AAA-BBB", flight, 4, 1, default_horizontal_features());
  ASSERT_EQ(h.dim(0), 1u);
  ASSERT_EQ(h.dim(1), 8u);
  EXPECT_DOUBLE_EQ(h.at(0, 0), stamp(flight, 4, index(Feature::plf)));
}

TEST(BuildHorizontal, GapRaisesInsufficientHistory) {
  FeatureTable t;
  const Date flight(2024, 3, 10);
  add_flight(t, "AAA-BBB", flight);
  std::erase_if(t.rows, [](const FeatureRow& r) { return r.days_before_departure == 6; });
  const FlightIndex idx(t);
  try {
    build_horizontal(idx, "AAA-BBB", flight, 5, 3, default_horizontal_features());
    FAIL() << "expected InsufficientHistory";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientHistory);
  }
  EXPECT_NO_THROW(build_horizontal(idx, "AAA-BBB", flight, 7, 3, default_horizontal_features()));
  EXPECT_THROW(build_horizontal(idx, "AAA-BBB", flight, 5, 0, default_horizontal_features()), Error);
  EXPECT_THROW(build_horizontal(idx, "AAA-BBB", flight + 1, 5, 3, default_horizontal_features()), Error);
}

class DailyRoute : public ::testing::Test {
 protected:
  void SetUp() override {
    for (int k = 10; k >= 1; --k) add_flight(table, "AAA-BBB", target - k);
    add_flight(table, "AAA-BBB", target);
  }
  FeatureTable table;
  const Date target{2024, 5, 20};
};

TEST_F(DailyRoute, MostRecentFlights) {
  const FlightIndex idx(table);
  const auto dates = vertical_flights(idx, "AAA-BBB", target, 4, 3, 1);
  EXPECT_EQ(dates, (std::vector<Date>{target - 3, target - 2, target - 1}));
  const auto oracle = oracle::vertical_dates(table, "AAA-BBB", target, 4, 3, 1);
  ASSERT_TRUE(oracle);
  EXPECT_EQ(dates, *oracle);
}

TEST_F(DailyRoute, StridedFlights) {
  const FlightIndex idx(table);
  const auto dates = vertical_flights(idx, "AAA-BBB", target, 4, 3, 2);
  EXPECT_EQ(dates, (std::vector<Date>{target - 5, target - 3, target - 1}));
  EXPECT_EQ(dates, *oracle::vertical_dates(table, "AAA-BBB", target, 4, 3, 2));
}

TEST_F(DailyRoute, RowsAreTakenAtTheQueryOffset) {
  const FlightIndex idx(table);
  const Tensor v = build_vertical(idx, "AAA-BBB", target, 4, 3, 1, default_vertical_features());
  ASSERT_EQ(v.dim(0), 3u);
  ASSERT_EQ(v.dim(1), 9u);
  const auto& cols = default_vertical_features();
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double want = cols[c] == Feature::days_before_departure
                              ? 4.0
                              : stamp(target - static_cast<int>(3 - k), 4, index(cols[c]));
      EXPECT_DOUBLE_EQ(v.at(k, c), want);
    }
}

TEST(BuildVertical, ExactlyWindowPriorFlights) {
  FeatureTable t;
  const Date target(2024, 5, 20);
  for (int k : {9, 4, 2}) add_flight(t, "AAA-BBB", target - k);
  add_flight(t, "AAA-BBB", target);
  add_flight(t, "ZZZ-YYY", target - 1);  // other routes never count
  const FlightIndex idx(t);
  EXPECT_EQ(vertical_flights(idx, "AAA-BBB", target, 0, 3, 1),
            (std::vector<Date>{target - 9, target - 4, target - 2}));
  EXPECT_THROW(vertical_flights(idx, "AAA-BBB", target, 0, 4, 1), Error);
  EXPECT_THROW(vertical_flights(idx, "AAA-BBB", target, 0, 3, 2), Error);
  EXPECT_THROW(vertical_flights(idx, "AAA-BBB", target, 0, 0, 1), Error);
  EXPECT_THROW(vertical_flights(idx, "AAA-BBB", target, 0, 1, 0), Error);
}

TEST(BuildVertical, SkipsFlightsWithoutARowAtD) {
  FeatureTable t;
  const Date target(2024, 5, 20);
  for (int k = 5; k >= 1; --k) add_flight(t, "AAA-BBB", target - k);
  add_flight(t, "AAA-BBB", target);
  std::erase_if(t.rows, [&](const FeatureRow& r) { return r.flight_date == target - 2 && r.days_before_departure == 3; });
  const FlightIndex idx(t);
  EXPECT_EQ(vertical_flights(idx, "AAA-BBB", target, 3, 3, 1),
            (std::vector<Date>{target - 4, target - 3, target - 1}));
  EXPECT_EQ(vertical_flights(idx, "AAA-BBB", target, 2, 3, 1),
            (std::vector<Date>{target - 3, target - 2, target - 1}));
}

TEST(BuildVertical, MatchesScanOracleOnRandomQueries) {
  Rng rng(41);
  for (int corpus = 0; corpus < 10; ++corpus) {
    const FeatureTable t = random_table(rng);
    const FlightIndex idx(t);
    for (int q = 0; q < 100; ++q) {
      const auto& row = t.rows[rng.below(t.rows.size())];
      const int d = row.days_before_departure;
      const int window = 1 + static_cast<int>(rng.below(6));
      const int stride = q % 2 == 0 ? 1 : 1 + static_cast<int>(rng.below(4));
      const auto want = oracle::vertical_dates(t, row.route_id, row.flight_date, d, window, stride);
      if (!want) {
        EXPECT_THROW(vertical_flights(idx, row.route_id, row.flight_date, d, window, stride), Error);
        continue;
      }
      EXPECT_EQ(vertical_flights(idx, row.route_id, row.flight_date, d, window, stride), *want);
      const Tensor v = build_vertical(idx, row.route_id, row.flight_date, d, window, stride,
                                      {Feature::days_before_departure, Feature::plf});
      for (std::size_t k = 0; k < v.dim(0); ++k) {
        EXPECT_EQ(v.at(k, 0), d);
        EXPECT_DOUBLE_EQ(v.at(k, 1), stamp((*want)[k], d, index(Feature::plf)));
      }
    }
  }
}

TEST(AssembleSamples, CountMatchesEnumerationOracle) {
  Rng rng(5);
  for (int corpus = 0; corpus < 4; ++corpus) {
    const FeatureTable t = random_table(rng);
    SequenceConfig cfg;
    cfg.stride = corpus % 2 + 1;
    const auto set = assemble_samples(t, cfg);
    const auto keys = oracle::enumerate_samples(t, cfg);
    ASSERT_EQ(set.samples.size(), keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const auto& s = set.samples[i];
      EXPECT_EQ(s.route_id, keys[i].route);
      EXPECT_EQ(s.flight_date, keys[i].flight);
      EXPECT_EQ(s.days_before_departure, keys[i].d);
      EXPECT_DOUBLE_EQ(s.target_plf, oracle::find_row(t, s.route_id, s.flight_date, 0)->operator[](Feature::plf));
      EXPECT_DOUBLE_EQ(s.naive_plf, oracle::find_row(t, s.route_id, s.flight_date, s.days_before_departure)
                                        ->operator[](Feature::plf));
      const auto h = oracle::horizontal(t, s.route_id, s.flight_date, s.days_before_departure, 3,
                                        cfg.horizontal_features);
      ASSERT_TRUE(h);
      for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < cfg.horizontal_features.size(); ++c)
          EXPECT_DOUBLE_EQ(s.horizontal.at(r, c), (*h)[r][c]);
    }
    std::size_t in_range = 0;
    for (const auto& r : t.rows) in_range += r.days_before_departure <= cfg.max_offset;
    EXPECT_EQ(set.samples.size() + set.skipped.total(), in_range);
  }
}

TEST(AssembleSamples, FlightWithoutHistoryIsCounted) {
  FeatureTable t;
  const Date first(2024, 1, 1);
  for (int k = 0; k < 4; ++k) add_flight(t, "AAA-BBB", first + k, 21);
  const auto set = assemble_samples(t);
  // Only the fourth flight has three predecessors; d = 20, 21 reach past the
  // oldest snapshot.
  EXPECT_EQ(set.samples.size(), 20u);
  EXPECT_EQ(set.skipped.insufficient_vertical, 60u);
  EXPECT_EQ(set.skipped.insufficient_horizontal, 8u);
  EXPECT_EQ(set.skipped.missing_target, 0u);
  for (const auto& s : set.samples) EXPECT_EQ(s.flight_date, first + 3);
}

TEST(AssembleSamples, SkipReasons) {
  FeatureTable t;
  const Date first(2024, 1, 1);
  for (int k = 0; k < 5; ++k) add_flight(t, "AAA-BBB", first + k, 21);
  // Last flight: no departure row. Fourth flight: no rows above d=2.
  std::erase_if(t.rows, [&](const FeatureRow& r) {
    return (r.flight_date == first + 4 && r.days_before_departure == 0) ||
           (r.flight_date == first + 3 && r.days_before_departure > 2);
  });
  const auto set = assemble_samples(t);
  EXPECT_EQ(set.skipped.missing_target, 21u);
  // d = 20, 21 on the first three flights; d = 2, 1 on the trimmed one.
  EXPECT_EQ(set.skipped.insufficient_horizontal, 8u);
  EXPECT_EQ(set.samples.size(), 1u);
  EXPECT_EQ(set.samples[0].days_before_departure, 0);

  std::ostringstream out;
  write_skip_counts(out, set.skipped);
  EXPECT_NE(out.str().find("missing_target,21"), std::string::npos);
  EXPECT_NE(out.str().find("insufficient_horizontal,8"), std::string::npos);
}

TEST(AssembleSamples, SingleHorizonGivesOneSamplePerFlight) {
  FeatureTable t;
  const Date first(2024, 1, 1);
  for (int k = 0; k < 8; ++k) add_flight(t, "AAA-BBB", first + k, 21);
  SequenceConfig cfg;
  cfg.min_offset = cfg.max_offset = 0;
  const auto set = assemble_samples(t, cfg);
  ASSERT_EQ(set.samples.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(set.samples[i].flight_date, first + static_cast<int>(i) + 3);
    EXPECT_EQ(set.samples[i].days_before_departure, 0);
  }
}

TEST(AssembleSamples, ReferenceCorpusVerticalRowsShareD) {
  const auto& split = testkit::reference_split();
  const auto& cols = default_vertical_features();
  const auto pos = std::find(cols.begin(), cols.end(), Feature::days_before_departure) - cols.begin();
  ASSERT_LT(pos, static_cast<long>(cols.size()));
  for (const auto* part : {&split.train, &split.validation, &split.test})
    for (auto s : *part) {
      split.scaler.inverse(s);
      for (std::size_t k = 0; k < s.vertical.dim(0); ++k)
        ASSERT_NEAR(s.vertical.at(k, static_cast<std::size_t>(pos)), s.days_before_departure, 1e-9);
    }
}

std::vector<SequenceSample> dated_samples(int n, int per_date = 1) {
  std::vector<SequenceSample> out;
  Rng rng(3);
  for (int i = 0; i < n; ++i) {
    SequenceSample s;
    s.route_id = "AAA-BBB";
    s.flight_date = Date(2024, 1, 1) + i / per_date;
    s.horizontal = Tensor({3, 2});
    s.vertical = Tensor({3, 3});
    for (auto& x : s.horizontal.data()) x = rng.normal() * 5 + 40;
    for (auto& x : s.vertical.data()) x = rng.uniform(-3, 9);
    s.target_plf = rng.uniform(20, 100);
    out.push_back(s);
  }
  return out;
}

TEST(ChronologicalSplit, CleanSplit) {
  auto samples = dated_samples(100);
  std::reverse(samples.begin(), samples.end());
  const auto split = chronological_split(samples);
  EXPECT_EQ(split.train.size(), 70u);
  EXPECT_EQ(split.validation.size(), 15u);
  EXPECT_EQ(split.test.size(), 15u);
  EXPECT_LT(split.train.back().flight_date, split.validation.front().flight_date);
  EXPECT_LT(split.validation.back().flight_date, split.test.front().flight_date);
}

TEST(ChronologicalSplit, BoundaryDateGoesToEarlierPartition) {
  const auto split = chronological_split(dated_samples(100, 4), {}, false);
  // Nominal cuts at 70 and 85 fall inside dates 17 and 21.
  EXPECT_EQ(split.train.size(), 72u);
  EXPECT_EQ(split.validation.size(), 16u);
  EXPECT_EQ(split.test.size(), 12u);
  EXPECT_LT(split.train.back().flight_date, split.validation.front().flight_date);
  EXPECT_LT(split.validation.back().flight_date, split.test.front().flight_date);
}

TEST(ChronologicalSplit, EmptyPartitions) {
  try {
    chronological_split(dated_samples(50, 50));
    FAIL() << "expected EmptyPartition";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyPartition);
  }
  EXPECT_THROW(chronological_split({}), Error);
  try {
    chronological_split(dated_samples(10), {0.5, 0.2, 0.2});
    FAIL() << "expected InvalidConfig";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
}

TEST(ChronologicalSplit, TrainStatisticsOnly) {
  auto samples = dated_samples(200);
  // Shift the later samples so a re-centred test set would be detectable.
  for (std::size_t i = 150; i < samples.size(); ++i)
    for (auto& x : samples[i].horizontal.data()) x += 30;
  const auto split = chronological_split(samples);
  for (bool horizontal : {true, false}) {
    const std::size_t cols = horizontal ? 2 : 3;
    for (std::size_t c = 0; c < cols; ++c) {
      double sum = 0, sq = 0, n = 0;
      for (const auto& s : split.train) {
        const auto& t = horizontal ? s.horizontal : s.vertical;
        for (std::size_t r = 0; r < t.dim(0); ++r) sum += t.at(r, c), n += 1;
      }
      const double mean = sum / n;
      for (const auto& s : split.train) {
        const auto& t = horizontal ? s.horizontal : s.vertical;
        for (std::size_t r = 0; r < t.dim(0); ++r) sq += (t.at(r, c) - mean) * (t.at(r, c) - mean);
      }
      EXPECT_NEAR(mean, 0.0, 1e-9);
      EXPECT_NEAR(std::sqrt(sq / n), 1.0, 1e-9);
    }
  }
  double test_mean = 0, n = 0;
  for (const auto& s : split.test)
    for (double x : s.horizontal.data()) test_mean += x, n += 1;
  EXPECT_GT(test_mean / n, 3.0);
  // Targets keep their units; the scaler carries train statistics.
  double target_sum = 0;
  for (const auto& s : split.train) target_sum += s.target_plf;
  EXPECT_NEAR(split.scaler.target_mean, target_sum / 140.0, 1e-9);
  EXPECT_NEAR(split.scaler.unscale_target(split.scaler.scale_target(73.25)), 73.25, 1e-12);
}

TEST(ChronologicalSplit, StandardizationIsInvertible) {
  const auto raw = chronological_split(dated_samples(120), {}, false);
  const auto scaled = chronological_split(dated_samples(120));
  for (std::size_t i = 0; i < raw.test.size(); ++i) {
    auto s = scaled.test[i];
    scaled.scaler.inverse(s);
    for (std::size_t k = 0; k < s.horizontal.size(); ++k)
      EXPECT_NEAR(s.horizontal[k], raw.test[i].horizontal[k], 1e-9);
    for (std::size_t k = 0; k < s.vertical.size(); ++k) EXPECT_NEAR(s.vertical[k], raw.test[i].vertical[k], 1e-9);
  }
}

TEST(ChronologicalSplit, ConstantColumnIsCentredOnly) {
  auto samples = dated_samples(40);
  for (auto& s : samples)
    for (std::size_t r = 0; r < 3; ++r) s.horizontal.at(r, 1) = 7.0;
  const auto split = chronological_split(samples);
  EXPECT_DOUBLE_EQ(split.scaler.horizontal.std[1], 1.0);
  for (const auto& s : split.test) EXPECT_DOUBLE_EQ(s.horizontal.at(0, 1), 0.0);
}

TEST(ChronologicalSplit, ReferenceCorpusIsLeakFree) {
  const auto& split = testkit::reference_split();
  ASSERT_FALSE(split.train.empty());
  Date train_max = split.train.front().flight_date;
  for (const auto& s : split.train) train_max = std::max(train_max, s.flight_date);
  for (const auto& s : split.validation) EXPECT_GT(s.flight_date, train_max);
  Date val_max = split.validation.front().flight_date;
  for (const auto& s : split.validation) val_max = std::max(val_max, s.flight_date);
  for (const auto& s : split.test) EXPECT_GT(s.flight_date, val_max);
  const double n = static_cast<double>(split.train.size() + split.validation.size() + split.test.size());
  EXPECT_NEAR(split.train.size() / n, 0.70, 0.01);
  EXPECT_NEAR(split.validation.size() / n, 0.15, 0.01);
  EXPECT_NEAR(split.test.size() / n, 0.15, 0.01);
}

TEST(SampleCache, RoundTripIsExact) {
  testkit::TempDir dir("cache");
  const auto split = chronological_split(dated_samples(60));
  write_sample_cache(dir / "samples.bin", split);
  const auto back = read_sample_cache(dir / "samples.bin");
  ASSERT_EQ(back.train.size(), split.train.size());
  ASSERT_EQ(back.test.size(), split.test.size());
  EXPECT_TRUE(back.standardized);
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    EXPECT_EQ(back.test[i].horizontal, split.test[i].horizontal);
    EXPECT_EQ(back.test[i].vertical, split.test[i].vertical);
    EXPECT_EQ(back.test[i].flight_date, split.test[i].flight_date);
    EXPECT_EQ(back.test[i].target_plf, split.test[i].target_plf);
  }
  EXPECT_EQ(back.scaler.horizontal.mean, split.scaler.horizontal.mean);
  EXPECT_EQ(back.scaler.vertical.std, split.scaler.vertical.std);
  EXPECT_EQ(back.scaler.target_std, split.scaler.target_std);

  testkit::write_text(dir / "junk.bin", "not a cache");
  EXPECT_THROW(read_sample_cache(dir / "junk.bin"), Error);
  EXPECT_THROW(read_sample_cache(dir / "absent.bin"), Error);
}

TEST(SampleCache, ManifestListsEverySample) {
  const auto split = chronological_split(dated_samples(20));
  std::ostringstream out;
  write_manifest(out, split);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "route_id,flight_date,days_before_departure,partition,target_plf");
  std::map<std::string, int> count;
  while (std::getline(in, line)) {
    const auto a = line.find(',', line.find(',', line.find(',') + 1) + 1);
    const auto b = line.find(',', a + 1);
    ++count[line.substr(a + 1, b - a - 1)];
  }
  EXPECT_EQ(count["train"], 14);
  EXPECT_EQ(count["validation"], 3);
  EXPECT_EQ(count["test"], 3);
}

}  // namespace
}  // namespace loadcast
