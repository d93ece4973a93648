#include "loadcast/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <tuple>
#include <unordered_map>

#include "loadcast/csv.hpp"
#include "loadcast/error.hpp"

namespace loadcast {

const std::array<std::string_view, kFeatureCount>& feature_names() {
  static const std::array<std::string_view, kFeatureCount> names = {
      "plf",
      "total_RPK",
      "rolling_avg_plf",
      "plf_historical",
      "days_before_departure",
      "record_date_day",
      "record_date_day_of_year",
      "flight_date_is_holiday",
      "flight_date_day",
      "flight_date_week",
      "flight_date_day_of_year",
      "flight_date_is_weekend",
      "total_ASK",
      "booked_seats",
      "total_seats",
      "distance_km",
      "flight_date_month",
      "flight_date_day_of_week",
      "record_date_month",
      "record_date_week",
      "record_date_day_of_week",
      "record_date_is_holiday",
      "record_date_is_weekend",
      "flight_date_day_of_week_sin",
      "flight_date_day_of_week_cos",
      "flight_date_month_sin",
      "flight_date_month_cos",
      "flight_date_day_of_month_sin",
      "flight_date_day_of_month_cos",
      "flight_date_week_of_year_sin",
      "flight_date_week_of_year_cos",
      "record_date_day_of_week_sin",
      "record_date_day_of_week_cos",
      "record_date_month_sin",
      "record_date_month_cos",
      "record_date_day_of_month_sin",
      "record_date_day_of_month_cos",
      "record_date_week_of_year_sin",
      "record_date_week_of_year_cos",
  };
  return names;
}

std::optional<Feature> feature_from_name(std::string_view name) {
  const auto& names = feature_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<Feature>(i);
  return std::nullopt;
}

StreamTag stream_tag(Feature f) {
  const auto name = feature_names()[index(f)];
  if (f == Feature::flight_date_is_holiday) return StreamTag::Shared;
  if (name.starts_with("record_date_")) return StreamTag::Horizontal;
  if (name.starts_with("flight_date_")) return StreamTag::Vertical;
  return StreamTag::Shared;
}

const std::vector<std::pair<Feature, Feature>>& cyclic_pairs() {
  using F = Feature;
  static const std::vector<std::pair<Feature, Feature>> pairs = {
      {F::flight_date_day_of_week_sin, F::flight_date_day_of_week_cos},
      {F::flight_date_month_sin, F::flight_date_month_cos},
      {F::flight_date_day_of_month_sin, F::flight_date_day_of_month_cos},
      {F::flight_date_week_of_year_sin, F::flight_date_week_of_year_cos},
      {F::record_date_day_of_week_sin, F::record_date_day_of_week_cos},
      {F::record_date_month_sin, F::record_date_month_cos},
      {F::record_date_day_of_month_sin, F::record_date_day_of_month_cos},
      {F::record_date_week_of_year_sin, F::record_date_week_of_year_cos},
  };
  return pairs;
}

const std::vector<Feature>& default_horizontal_features() {
  using F = Feature;
  static const std::vector<Feature> h = {
      F::plf,           F::total_RPK,       F::rolling_avg_plf,         F::plf_historical,
      F::days_before_departure, F::record_date_day, F::record_date_day_of_year,
      F::flight_date_is_holiday,
  };
  return h;
}

// flight_date_week is left out: it duplicates flight_date_day_of_year (|r| > 0.99).
const std::vector<Feature>& default_vertical_features() {
  using F = Feature;
  static const std::vector<Feature> v = {
      F::plf,           F::total_RPK,          F::rolling_avg_plf,
      F::plf_historical, F::days_before_departure, F::flight_date_is_holiday,
      F::flight_date_day, F::flight_date_day_of_year, F::flight_date_is_weekend,
  };
  return v;
}

double compute_plf(long booked, long total) {
  if (total == 0) throw Error(ErrorCode::ZeroCapacity, "total seats is zero");
  return 100.0 * static_cast<double>(booked) / static_cast<double>(total);
}

PassengerKm compute_rpk_ask(long booked, long total, double distance_km) {
  return {static_cast<double>(booked) * distance_km, static_cast<double>(total) * distance_km};
}

std::pair<double, double> cyclic_encode(long value, long period) {
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(value) / static_cast<double>(period);
  return {std::sin(angle), std::cos(angle)};
}

std::vector<double> rolling_avg_plf(std::span<const double> plf, std::size_t window) {
  std::vector<double> out(plf.size());
  for (std::size_t i = 0; i < plf.size(); ++i) {
    const std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
    double s = 0;
    for (std::size_t j = lo; j <= i; ++j) s += plf[j];
    out[i] = s / static_cast<double>(i + 1 - lo);
  }
  return out;
}

HistoricalPlf plf_historical(std::span<const FeatureRow> rows, const std::string& route_id, int d,
                             const Date& asof, double prior) {
  double at_offset = 0, route_any = 0, global = 0;
  long n_offset = 0, n_route = 0, n_global = 0;
  const Date recorded = asof - d;
  for (const auto& r : rows) {
    if (!(r.flight_date < asof)) continue;
    const double plf = r[Feature::plf];
    if (r.route_id == route_id) {
      if (r.record_date < recorded) {
        route_any += plf;
        ++n_route;
      }
      if (r.days_before_departure == d) {
        at_offset += plf;
        ++n_offset;
      }
    }
    if (r.days_before_departure == d) {
      global += plf;
      ++n_global;
    }
  }
  if (n_offset) return {at_offset / n_offset, HistoryTier::RouteAtOffset};
  if (n_route) return {route_any / n_route, HistoryTier::Route};
  if (n_global) return {global / n_global, HistoryTier::Global};
  return {prior, HistoryTier::Prior};
}

namespace {

struct Accumulator {
  double sum = 0;
  long count = 0;
  void add(double v) {
    sum += v;
    ++count;
  }
  double mean() const { return sum / static_cast<double>(count); }
};

void fill_calendar(FeatureRow& row, const HolidayCalendar& holidays, const FeatureConfig& cfg) {
  using F = Feature;
  const Date& fd = row.flight_date;
  const Date& rd = row.record_date;
  auto put_cyclic = [&](F sin_f, F cos_f, long value, long period) {
    auto [s, c] = cyclic_encode(value, period);
    row[sin_f] = s;
    row[cos_f] = c;
  };

  row[F::flight_date_day] = fd.day();
  row[F::flight_date_week] = fd.iso_week();
  row[F::flight_date_day_of_year] = fd.day_of_year();
  row[F::flight_date_month] = fd.month();
  row[F::flight_date_day_of_week] = fd.day_of_week();
  row[F::flight_date_is_holiday] = holidays.contains(fd) ? 1.0 : 0.0;
  row[F::flight_date_is_weekend] = cfg.weekend_days.count(fd.day_of_week()) ? 1.0 : 0.0;
  put_cyclic(F::flight_date_day_of_week_sin, F::flight_date_day_of_week_cos, fd.day_of_week(), 7);
  put_cyclic(F::flight_date_month_sin, F::flight_date_month_cos, fd.month() - 1, 12);
  put_cyclic(F::flight_date_day_of_month_sin, F::flight_date_day_of_month_cos, fd.day() - 1, 31);
  put_cyclic(F::flight_date_week_of_year_sin, F::flight_date_week_of_year_cos, fd.iso_week() - 1, 53);

  row[F::record_date_day] = rd.day();
  row[F::record_date_week] = rd.iso_week();
  row[F::record_date_day_of_year] = rd.day_of_year();
  row[F::record_date_month] = rd.month();
  row[F::record_date_day_of_week] = rd.day_of_week();
  row[F::record_date_is_holiday] = holidays.contains(rd) ? 1.0 : 0.0;
  row[F::record_date_is_weekend] = cfg.weekend_days.count(rd.day_of_week()) ? 1.0 : 0.0;
  put_cyclic(F::record_date_day_of_week_sin, F::record_date_day_of_week_cos, rd.day_of_week(), 7);
  put_cyclic(F::record_date_month_sin, F::record_date_month_cos, rd.month() - 1, 12);
  put_cyclic(F::record_date_day_of_month_sin, F::record_date_day_of_month_cos, rd.day() - 1, 31);
  put_cyclic(F::record_date_week_of_year_sin, F::record_date_week_of_year_cos, rd.iso_week() - 1, 53);
}

// Earlier flights of the route, restricted to rows recorded before `recorded`.
Accumulator route_before(const std::vector<FeatureRow>& rows, std::size_t begin, std::size_t end, const Date& recorded) {
  Accumulator acc;
  for (std::size_t i = begin; i < end; ++i)
    if (rows[i].record_date < recorded) acc.add(rows[i][Feature::plf]);
  return acc;
}

}  // namespace

FeatureTable build_feature_rows(const std::vector<BookingSnapshot>& snapshots,
                                const std::vector<RouteMeta>& routes,
                                const HolidayCalendar& holidays, const FeatureConfig& cfg) {
  if (cfg.rolling_window == 0) throw Error(ErrorCode::InvalidConfig, "rolling window must be >= 1");
  std::unordered_map<std::string, const RouteMeta*> route_index;
  for (const auto& r : routes) route_index[r.route_id] = &r;

  FeatureTable table;
  table.rows.reserve(snapshots.size());
  for (const auto& s : snapshots) {
    auto it = route_index.find(s.route_id);
    if (it == route_index.end())
      throw Error(ErrorCode::UnknownRoute, "no route metadata for '" + s.route_id + "'");
    const double distance = it->second->distance_km;
    FeatureRow row;
    row.route_id = s.route_id;
    row.flight_date = s.flight_date;
    row.record_date = s.record_date;
    row.days_before_departure = s.days_before_departure;
    double plf = compute_plf(s.booked_seats, s.total_seats);
    if (cfg.clip_plf) plf = std::min(plf, 100.0);
    const auto km = compute_rpk_ask(s.booked_seats, s.total_seats, distance);
    row[Feature::plf] = plf;
    row[Feature::total_RPK] = km.rpk;
    row[Feature::total_ASK] = km.ask;
    row[Feature::booked_seats] = static_cast<double>(s.booked_seats);
    row[Feature::total_seats] = static_cast<double>(s.total_seats);
    row[Feature::distance_km] = distance;
    row[Feature::days_before_departure] = s.days_before_departure;
    fill_calendar(row, holidays, cfg);
    table.rows.push_back(std::move(row));
  }

  std::stable_sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.route_id, a.flight_date, b.days_before_departure) <
           std::tie(b.route_id, b.flight_date, a.days_before_departure);
  });

  // Rolling average within each flight, oldest record first.
  auto& rows = table.rows;
  for (std::size_t start = 0; start < rows.size();) {
    std::size_t end = start;
    while (end < rows.size() && rows[end].route_id == rows[start].route_id &&
           rows[end].flight_date == rows[start].flight_date)
      ++end;
    std::vector<double> plf;
    plf.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) plf.push_back(rows[i][Feature::plf]);
    const auto avg = rolling_avg_plf(plf, cfg.rolling_window);
    for (std::size_t i = start; i < end; ++i) rows[i][Feature::rolling_avg_plf] = avg[i - start];
    start = end;
  }

  // Global tier: per flight date, per offset, accumulated over strictly
  // earlier dates across all routes.
  std::map<Date, std::map<int, Accumulator>> by_date;
  for (const auto& r : rows) by_date[r.flight_date][r.days_before_departure].add(r[Feature::plf]);
  std::map<Date, std::map<int, Accumulator>> global_before;
  {
    std::map<int, Accumulator> running;
    for (const auto& [date, per_d] : by_date) {
      global_before[date] = running;
      for (const auto& [d, acc] : per_d) {
        running[d].sum += acc.sum;
        running[d].count += acc.count;
      }
    }
  }

  // Route tiers: rows are grouped by route then flight date, so history can be
  // accumulated flight by flight and committed after each flight completes.
  for (std::size_t start = 0; start < rows.size();) {
    const std::string& route = rows[start].route_id;
    std::map<int, Accumulator> at_offset;
    std::size_t flight_start = start;
    while (flight_start < rows.size() && rows[flight_start].route_id == route) {
      std::size_t flight_end = flight_start;
      while (flight_end < rows.size() && rows[flight_end].route_id == route &&
             rows[flight_end].flight_date == rows[flight_start].flight_date)
        ++flight_end;
      const auto& global = global_before[rows[flight_start].flight_date];
      for (std::size_t i = flight_start; i < flight_end; ++i) {
        auto& row = rows[i];
        const int d = row.days_before_departure;
        auto off = at_offset.find(d);
        if (off != at_offset.end() && off->second.count > 0) {
          row[Feature::plf_historical] = off->second.mean();
          row.history_tier = HistoryTier::RouteAtOffset;
        } else if (auto any = route_before(rows, start, flight_start, row.record_date); any.count > 0) {
          row[Feature::plf_historical] = any.mean();
          row.history_tier = HistoryTier::Route;
        } else if (auto g = global.find(d); g != global.end() && g->second.count > 0) {
          row[Feature::plf_historical] = g->second.mean();
          row.history_tier = HistoryTier::Global;
        } else {
          row[Feature::plf_historical] = cfg.history_prior;
          row.history_tier = HistoryTier::Prior;
        }
      }
      for (std::size_t i = flight_start; i < flight_end; ++i)
        at_offset[rows[i].days_before_departure].add(rows[i][Feature::plf]);
      flight_start = flight_end;
    }
    start = flight_start;
  }
  return table;
}

void write_features(std::ostream& out, const FeatureTable& table) {
  csv::Writer w(out);
  std::vector<std::string> header = {"route_id", "flight_date", "record_date"};
  for (auto n : feature_names()) header.emplace_back(n);
  header.emplace_back("plf_historical_tier");
  w.row(header);
  std::vector<std::string> cells;
  for (const auto& r : table.rows) {
    cells.clear();
    cells.push_back(r.route_id);
    cells.push_back(r.flight_date.iso());
    cells.push_back(r.record_date.iso());
    for (double v : r.values) cells.push_back(csv::format(v));
    cells.push_back(std::to_string(static_cast<int>(r.history_tier)));
    w.row(cells);
  }
}

namespace {
FeatureTable features_from(const csv::Table& t) {
  const auto c_route = t.column("route_id");
  const auto c_flight = t.column("flight_date");
  const auto c_record = t.column("record_date");
  const auto c_tier = t.column("plf_historical_tier");
  std::array<std::size_t, kFeatureCount> cols{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) cols[i] = t.column(feature_names()[i]);

  FeatureTable table;
  table.rows.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& cells = t.rows[r];
    if (cells.size() != t.header.size())
      throw Error(ErrorCode::MissingColumn, "wrong cell count", r + 1);
    FeatureRow row;
    row.route_id = cells[c_route];
    auto fd = Date::parse(cells[c_flight]);
    auto rd = Date::parse(cells[c_record]);
    if (!fd || !rd) throw Error(ErrorCode::BadDate, "unparseable date", r + 1);
    row.flight_date = *fd;
    row.record_date = *rd;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const auto& s = cells[cols[i]];
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), row.values[i]);
      if (ec != std::errc() || ptr != s.data() + s.size())
        throw Error(ErrorCode::BadNumber, "bad value for " + std::string(feature_names()[i]), r + 1);
    }
    row.days_before_departure = static_cast<int>(row[Feature::days_before_departure]);
    row.history_tier = static_cast<HistoryTier>(std::stoi(cells[c_tier]));
    table.rows.push_back(std::move(row));
  }
  return table;
}
}  // namespace

FeatureTable parse_features(std::istream& in) { return features_from(csv::parse(in)); }
FeatureTable read_features(const std::filesystem::path& path) { return features_from(csv::read(path)); }

}  // namespace loadcast
