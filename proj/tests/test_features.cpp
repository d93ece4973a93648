#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "loadcast/error.hpp"
#include "loadcast/features.hpp"
#include "support.hpp"

using namespace loadcast;

namespace {

// Sakamoto's weekday, shifted to 0 = Monday.
unsigned weekday_oracle(int y, int m, int d) {
  static const int t[] = {0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4};
  if (m < 3) y -= 1;
  const int sunday_based = (y + y / 4 - y / 100 + y / 400 + t[m - 1] + d) % 7;
  return static_cast<unsigned>((sunday_based + 6) % 7);
}

struct SmallCorpus {
  std::vector<BookingSnapshot> flights;
  std::vector<RouteMeta> routes;
  HolidayCalendar holidays;
};

// A few routes with randomly missing snapshots, so every history tier fires.
SmallCorpus random_corpus(std::uint64_t seed, int flights_per_route, double drop) {
  GeneratorConfig cfg;
  cfg.routes = 3;
  cfg.flights_per_route = flights_per_route;
  auto corpus = generate_synthetic(cfg, seed);
  SmallCorpus out;
  Rng rng(seed + 100);
  for (auto& s : aggregate_legs(corpus.snapshots))
    if (!rng.bernoulli(drop)) out.flights.push_back(s);
  out.routes = corpus.routes;
  out.holidays = corpus.holidays;
  return out;
}

struct History {
  double value;
  HistoryTier tier;
};

History history_oracle(const FeatureTable& t, const FeatureRow& r, double prior) {
  auto mean_of = [&](auto pick) -> std::optional<double> {
    double s = 0;
    int n = 0;
    for (const auto& q : t.rows)
      if (pick(q)) {
        s += q[Feature::plf];
        ++n;
      }
    if (!n) return std::nullopt;
    return s / n;
  };
  const int d = r.days_before_departure;
  if (auto v = mean_of([&](const FeatureRow& q) {
        return q.route_id == r.route_id && q.flight_date < r.flight_date && q.days_before_departure == d;
      }))
    return {*v, HistoryTier::RouteAtOffset};
  if (auto v = mean_of([&](const FeatureRow& q) {
        return q.route_id == r.route_id && q.flight_date < r.flight_date && q.record_date < r.record_date;
      }))
    return {*v, HistoryTier::Route};
  if (auto v = mean_of([&](const FeatureRow& q) { return q.flight_date < r.flight_date && q.days_before_departure == d; }))
    return {*v, HistoryTier::Global};
  return {prior, HistoryTier::Prior};
}

}  // namespace

TEST(ComputePlf, PublishedSeatCounts) {
  EXPECT_NEAR(compute_plf(150, 162), 92.59, 5e-3);
  EXPECT_NEAR(compute_plf(150, 419), 35.80, 5e-3);
  EXPECT_EQ(compute_plf(0, 162), 0.0);
  EXPECT_GT(compute_plf(170, 162), 100.0);
}

TEST(ComputePlf, ZeroCapacity) {
  try {
    compute_plf(1, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroCapacity);
  }
}

TEST(ComputeRpkAsk, Products) {
  const auto km = compute_rpk_ask(100, 200, 500);
  EXPECT_EQ(km.rpk, 50000.0);
  EXPECT_EQ(km.ask, 100000.0);
  const auto full = compute_rpk_ask(162, 162, 242.5);
  EXPECT_EQ(full.rpk, full.ask);
}

TEST(ComputeRpkAsk, PlfIsRatioOfKilometres) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const long total = 1 + static_cast<long>(rng.below(500));
    const long booked = static_cast<long>(rng.below(static_cast<std::uint64_t>(total) + 20));
    const double dist = rng.uniform(50, 12000);
    const auto km = compute_rpk_ask(booked, total, dist);
    EXPECT_NEAR(compute_plf(booked, total), 100.0 * km.rpk / km.ask, 1e-10);
  }
}

TEST(CyclicEncode, KnownPhases) {
  auto [s0, c0] = cyclic_encode(0, 7);
  EXPECT_EQ(s0, 0.0);
  EXPECT_EQ(c0, 1.0);
  auto [s3, c3] = cyclic_encode(3, 7);
  EXPECT_NEAR(s3, 0.43388, 1e-5);
  EXPECT_NEAR(c3, -0.90097, 1e-5);
  for (long p : {7L, 12L, 31L, 53L}) {
    auto [sp, cp] = cyclic_encode(p, p);
    EXPECT_NEAR(sp, 0.0, 1e-12);
    EXPECT_NEAR(cp, 1.0, 1e-12);
  }
}

TEST(RollingAvgPlf, Examples) {
  const std::vector<double> flat(10, 40.0);
  for (double v : rolling_avg_plf(flat, 7)) EXPECT_EQ(v, 40.0);
  const std::vector<double> ramp{10, 20, 30};
  EXPECT_EQ(rolling_avg_plf(ramp, 2), (std::vector<double>{10, 15, 25}));
  Rng rng(1);
  std::vector<double> noise;
  for (int i = 0; i < 31; ++i) noise.push_back(rng.uniform(0, 100));
  EXPECT_EQ(rolling_avg_plf(noise, 1), noise);
}

TEST(PlfHistorical, TwoPriorFlightsAreAveraged) {
  std::vector<FeatureRow> rows(3);
  for (int i = 0; i < 3; ++i) {
    rows[i].route_id = "R";
    rows[i].flight_date = Date(2023, 1, 10) + i;
    rows[i].days_before_departure = 5;
    rows[i].record_date = rows[i].flight_date - 5;
  }
  rows[0][Feature::plf] = 60;
  rows[1][Feature::plf] = 80;
  rows[2][Feature::plf] = 99;
  const auto h = plf_historical(rows, "R", 5, Date(2023, 1, 12));
  EXPECT_EQ(h.value, 70.0);
  EXPECT_EQ(h.tier, HistoryTier::RouteAtOffset);
}

TEST(PlfHistorical, FirstFlightFallsBackAndIsFlagged) {
  std::vector<FeatureRow> rows(1);
  rows[0].route_id = "R";
  rows[0].flight_date = Date(2023, 1, 10);
  rows[0].record_date = Date(2023, 1, 5);
  rows[0].days_before_departure = 5;
  rows[0][Feature::plf] = 50;
  const auto h = plf_historical(rows, "R", 5, Date(2023, 1, 10), 42.0);
  EXPECT_EQ(h.tier, HistoryTier::Prior);
  EXPECT_EQ(h.value, 42.0);
  // another route with earlier history supplies the global tier
  const auto g = plf_historical(rows, "S", 5, Date(2023, 1, 11));
  EXPECT_EQ(g.tier, HistoryTier::Global);
  EXPECT_EQ(g.value, 50.0);

  GeneratorConfig cfg;
  cfg.flights_per_route = 3;
  const auto corpus = generate_synthetic(cfg, 2);
  const auto table = build_feature_rows(aggregate_legs(corpus.snapshots), corpus.routes, corpus.holidays);
  std::stringstream csv;
  write_features(csv, table);
  EXPECT_NE(csv.str().find("plf_historical_tier"), std::string::npos);
  const Date first = table.rows.front().flight_date;
  for (const auto& r : table.rows)
    if (r.flight_date == first) EXPECT_NE(r.history_tier, HistoryTier::RouteAtOffset);
}

TEST(PlfHistorical, MatchesNestedLoopOracle) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto c = random_corpus(seed, 17, 0.25);  // 51 flights
    FeatureConfig fc;
    fc.history_prior = 12.5;
    const auto table = build_feature_rows(c.flights, c.routes, c.holidays, fc);
    std::set<HistoryTier> tiers;
    for (const auto& r : table.rows) {
      const auto want = history_oracle(table, r, fc.history_prior);
      ASSERT_EQ(r.history_tier, want.tier) << r.route_id << ' ' << r.flight_date.iso() << " d=" << r.days_before_departure;
      ASSERT_NEAR(r[Feature::plf_historical], want.value, 1e-9);
      const auto direct = plf_historical(table.rows, r.route_id, r.days_before_departure, r.flight_date, fc.history_prior);
      ASSERT_EQ(direct.tier, want.tier);
      ASSERT_NEAR(direct.value, want.value, 1e-9);
      tiers.insert(r.history_tier);
    }
    EXPECT_GE(tiers.size(), 3u) << "seed " << seed;
  }
}

TEST(BuildFeatureRows, CalendarFlags) {
  GeneratorConfig cfg;
  cfg.flights_per_route = 60;
  const auto corpus = generate_synthetic(cfg, 4);
  const auto table = build_feature_rows(aggregate_legs(corpus.snapshots), corpus.routes, corpus.holidays);
  bool saw_holiday = false, saw_weekend = false;
  for (const auto& r : table.rows) {
    const bool holiday = corpus.holidays.contains(r.flight_date);
    ASSERT_EQ(r[Feature::flight_date_is_holiday], holiday ? 1.0 : 0.0);
    ASSERT_EQ(r[Feature::record_date_is_holiday], corpus.holidays.contains(r.record_date) ? 1.0 : 0.0);
    const auto wd = weekday_oracle(r.flight_date.year(), static_cast<int>(r.flight_date.month()),
                                   static_cast<int>(r.flight_date.day()));
    ASSERT_EQ(r[Feature::flight_date_day_of_week], wd);
    const bool weekend = wd == 4 || wd == 5;  // Friday, Saturday
    ASSERT_EQ(r[Feature::flight_date_is_weekend], weekend ? 1.0 : 0.0);
    saw_holiday |= holiday;
    saw_weekend |= weekend;
  }
  EXPECT_TRUE(saw_holiday);
  EXPECT_TRUE(saw_weekend);
}

TEST(BuildFeatureRows, KnownFridayAndSaturday) {
  std::vector<BookingSnapshot> snaps;
  for (Date d : {Date(2024, 3, 1), Date(2024, 3, 2), Date(2024, 3, 3)}) {  // Fri, Sat, Sun
    BookingSnapshot s{"R", d, d, 0, 10, 100, "X"};
    snaps.push_back(s);
  }
  RouteMeta route;
  route.route_id = "R";
  route.distance_km = 100;
  HolidayCalendar hol;
  hol.dates.insert(Date(2024, 3, 3));
  const auto t = build_feature_rows(snaps, {route}, hol);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0][Feature::flight_date_is_weekend], 1.0);
  EXPECT_EQ(t.rows[1][Feature::flight_date_is_weekend], 1.0);
  EXPECT_EQ(t.rows[2][Feature::flight_date_is_weekend], 0.0);
  EXPECT_EQ(t.rows[2][Feature::flight_date_is_holiday], 1.0);
  FeatureConfig sat_sun;
  sat_sun.weekend_days = {5, 6};
  const auto t2 = build_feature_rows(snaps, {route}, hol, sat_sun);
  EXPECT_EQ(t2.rows[0][Feature::flight_date_is_weekend], 0.0);
  EXPECT_EQ(t2.rows[2][Feature::flight_date_is_weekend], 1.0);
}

TEST(BuildFeatureRows, SchemaAndInvariants) {
  const auto c = random_corpus(9, 30, 0.1);
  const auto table = build_feature_rows(c.flights, c.routes, c.holidays);
  EXPECT_EQ(feature_names().size(), 39u);
  std::set<std::string_view> names(feature_names().begin(), feature_names().end());
  EXPECT_EQ(names.size(), 39u);
  const std::set<Feature> flags{Feature::flight_date_is_holiday, Feature::flight_date_is_weekend,
                                Feature::record_date_is_holiday, Feature::record_date_is_weekend};
  for (const auto& r : table.rows) {
    for (double v : r.values) ASSERT_TRUE(std::isfinite(v));
    for (auto [s, co] : cyclic_pairs()) ASSERT_NEAR(r[s] * r[s] + r[co] * r[co], 1.0, 1e-12);
    for (auto f : flags) ASSERT_TRUE(r[f] == 0.0 || r[f] == 1.0);
    ASSERT_EQ(r[Feature::days_before_departure], r.days_before_departure);
    ASSERT_EQ(r[Feature::flight_date_week], r.flight_date.iso_week());
  }
  EXPECT_EQ(cyclic_pairs().size(), 8u);
  EXPECT_EQ(default_horizontal_features().size(), 8u);
  EXPECT_EQ(default_vertical_features().size(), 9u);
  for (const auto& n : feature_names()) EXPECT_EQ(feature_names()[index(*feature_from_name(n))], n);
  EXPECT_FALSE(feature_from_name("nope").has_value());
}

TEST(BuildFeatureRows, RollingUsesOnlyEarlierRecords) {
  const auto c = random_corpus(5, 20, 0.2);
  FeatureConfig fc;
  fc.rolling_window = 4;
  const auto table = build_feature_rows(c.flights, c.routes, c.holidays, fc);
  for (const auto& r : table.rows) {
    std::vector<std::pair<Date, double>> seen;
    for (const auto& q : table.rows)
      if (q.route_id == r.route_id && q.flight_date == r.flight_date && q.record_date <= r.record_date)
        seen.emplace_back(q.record_date, q[Feature::plf]);
    std::sort(seen.begin(), seen.end());
    const std::size_t take = std::min<std::size_t>(4, seen.size());
    double s = 0;
    for (std::size_t i = seen.size() - take; i < seen.size(); ++i) s += seen[i].second;
    ASSERT_NEAR(r[Feature::rolling_avg_plf], s / static_cast<double>(take), 1e-9);
  }
}

TEST(BuildFeatureRows, ClipAndErrors) {
  BookingSnapshot over{"R", Date(2024, 1, 5), Date(2024, 1, 5), 0, 170, 162, "B738"};
  RouteMeta route;
  route.route_id = "R";
  route.distance_km = 400;
  EXPECT_GT(build_feature_rows({over}, {route}, {}).rows[0][Feature::plf], 100.0);
  FeatureConfig clip;
  clip.clip_plf = true;
  EXPECT_EQ(build_feature_rows({over}, {route}, {}, clip).rows[0][Feature::plf], 100.0);
  try {
    build_feature_rows({over}, {}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownRoute);
  }
  FeatureConfig zero;
  zero.rolling_window = 0;
  EXPECT_THROW(build_feature_rows({over}, {route}, {}, zero), Error);
}

TEST(FeatureTable, CsvRoundTripIsExact) {
  const auto c = random_corpus(6, 8, 0.1);
  const auto table = build_feature_rows(c.flights, c.routes, c.holidays);
  std::stringstream buf;
  write_features(buf, table);
  const auto back = parse_features(buf);
  ASSERT_EQ(back.rows.size(), table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    ASSERT_EQ(back.rows[i].values, table.rows[i].values);
    ASSERT_EQ(back.rows[i].history_tier, table.rows[i].history_tier);
    ASSERT_EQ(back.rows[i].record_date, table.rows[i].record_date);
  }
}
