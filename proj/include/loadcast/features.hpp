#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "loadcast/calendar.hpp"
#include "loadcast/ingest.hpp"

namespace loadcast {

inline constexpr std::size_t kFeatureCount = 39;

// Column order of every FeatureRow. The first twelve are the selected inputs
// of the published model; the rest are companions that the selection
// pipeline may or may not keep.
enum class Feature : std::size_t {
  plf,
  total_RPK,
  rolling_avg_plf,
  plf_historical,
  days_before_departure,
  record_date_day,
  record_date_day_of_year,
  flight_date_is_holiday,
  flight_date_day,
  flight_date_week,
  flight_date_day_of_year,
  flight_date_is_weekend,
  total_ASK,
  booked_seats,
  total_seats,
  distance_km,
  flight_date_month,
  flight_date_day_of_week,
  record_date_month,
  record_date_week,
  record_date_day_of_week,
  record_date_is_holiday,
  record_date_is_weekend,
  flight_date_day_of_week_sin,
  flight_date_day_of_week_cos,
  flight_date_month_sin,
  flight_date_month_cos,
  flight_date_day_of_month_sin,
  flight_date_day_of_month_cos,
  flight_date_week_of_year_sin,
  flight_date_week_of_year_cos,
  record_date_day_of_week_sin,
  record_date_day_of_week_cos,
  record_date_month_sin,
  record_date_month_cos,
  record_date_day_of_month_sin,
  record_date_day_of_month_cos,
  record_date_week_of_year_sin,
  record_date_week_of_year_cos,
};

constexpr std::size_t index(Feature f) { return static_cast<std::size_t>(f); }

const std::array<std::string_view, kFeatureCount>& feature_names();
std::optional<Feature> feature_from_name(std::string_view name);

// Which sequence stream a feature may feed. Booking-state features are shared.
enum class StreamTag { Horizontal, Vertical, Shared };
StreamTag stream_tag(Feature f);

// The (sin, cos) column pairs, for invariant checks.
const std::vector<std::pair<Feature, Feature>>& cyclic_pairs();

// The model inputs: eight horizontal and nine vertical columns.
const std::vector<Feature>& default_horizontal_features();
const std::vector<Feature>& default_vertical_features();

// Which fallback produced plf_historical for a row.
enum class HistoryTier { RouteAtOffset = 0, Route = 1, Global = 2, Prior = 3 };

struct FeatureRow {
  std::string route_id;
  Date flight_date;
  Date record_date;
  int days_before_departure = 0;
  std::array<double, kFeatureCount> values{};
  HistoryTier history_tier = HistoryTier::RouteAtOffset;

  double operator[](Feature f) const { return values[index(f)]; }
  double& operator[](Feature f) { return values[index(f)]; }
};

struct FeatureConfig {
  std::size_t rolling_window = 7;
  std::set<unsigned> weekend_days{4, 5};  // 0 = Monday; Friday and Saturday
  bool clip_plf = false;                  // cap PLF at 100 for overbooked flights
  double history_prior = 0.0;             // used only when no earlier flight exists at all
};

// PLF in percentage points.
double compute_plf(long booked, long total);

struct PassengerKm {
  double rpk;
  double ask;
};
PassengerKm compute_rpk_ask(long booked, long total, double distance_km);

std::pair<double, double> cyclic_encode(long value, long period);

// Trailing mean of `plf` over the last `window` entries, inclusive.
std::vector<double> rolling_avg_plf(std::span<const double> plf, std::size_t window);

struct HistoricalPlf {
  double value;
  HistoryTier tier;
};

// Mean PLF at offset d over flights of `route_id` strictly before `asof`,
// falling back to the route's earlier flights at any offset (rows recorded
// before asof - d only), then every earlier flight at offset d, then `prior`.
// Rows must already carry plf.
HistoricalPlf plf_historical(std::span<const FeatureRow> rows, const std::string& route_id, int d,
                             const Date& asof, double prior = 0.0);

struct FeatureTable {
  std::vector<FeatureRow> rows;  // ordered by (route_id, flight_date, d descending)
};

// `snapshots` must be flight-date level (see aggregate_legs).
FeatureTable build_feature_rows(const std::vector<BookingSnapshot>& snapshots,
                                const std::vector<RouteMeta>& routes,
                                const HolidayCalendar& holidays, const FeatureConfig& config = {});

void write_features(std::ostream& out, const FeatureTable& table);
FeatureTable read_features(const std::filesystem::path& path);
FeatureTable parse_features(std::istream& in);

}  // namespace loadcast
