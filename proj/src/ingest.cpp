#include "loadcast/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <tuple>

#include "loadcast/csv.hpp"
#include "loadcast/error.hpp"
#include "loadcast/random.hpp"

namespace loadcast {

std::string to_string(Reach r) { return r == Reach::Domestic ? "domestic" : "international"; }
std::string to_string(Service s) { return s == Service::Direct ? "direct" : "transit"; }
std::string to_string(Frequency f) { return f == Frequency::High ? "high_freq" : "low_freq"; }
std::string to_string(Haul h) {
  switch (h) {
    case Haul::Short: return "short";
    case Haul::Mid: return "mid";
    case Haul::Long: return "long";
  }
  return "short";
}

double route_distance(const Airport& a, const Airport& b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double phi1 = a.latitude * rad, phi2 = b.latitude * rad;
  const double dphi = phi2 - phi1;
  const double dlambda = (b.longitude - a.longitude) * rad;
  const double h = std::sin(dphi / 2) * std::sin(dphi / 2) +
                   std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2) * std::sin(dlambda / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

namespace {

template <typename T>
bool parse_number(const std::string& text, T& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && !text.empty();
}

long parse_long(const std::string& text, std::size_t row, const char* what) {
  long v = 0;
  if (!parse_number(text, v))
    throw Error(ErrorCode::BadNumber, std::string(what) + " is not an integer: '" + text + "'", row);
  return v;
}

double parse_double(const std::string& text, std::size_t row, const char* what) {
  double v = 0;
  if (!parse_number(text, v))
    throw Error(ErrorCode::BadNumber, std::string(what) + " is not a number: '" + text + "'", row);
  return v;
}

Date parse_date(const std::string& text, std::size_t row, const char* what) {
  auto d = Date::parse(text);
  if (!d) throw Error(ErrorCode::BadDate, std::string(what) + " is not YYYY-MM-DD: '" + text + "'", row);
  return *d;
}

const std::string& cell(const csv::Table& t, std::size_t r, std::size_t c) {
  if (c >= t.rows[r].size())
    throw Error(ErrorCode::MissingColumn, "row has " + std::to_string(t.rows[r].size()) + " cells",
                r + 1);
  return t.rows[r][c];
}

std::vector<BookingSnapshot> reservations_from(const csv::Table& t) {
  const auto c_route = t.column("route_id");
  const auto c_flight = t.column("flight_date");
  const auto c_record = t.column("record_date");
  const auto c_booked = t.column("booked_seats");
  const auto c_total = t.column("total_seats");
  const auto c_aircraft = t.column("aircraft_type");

  std::vector<BookingSnapshot> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::size_t row = r + 1;
    BookingSnapshot s;
    s.route_id = cell(t, r, c_route);
    s.flight_date = parse_date(cell(t, r, c_flight), row, "flight_date");
    s.record_date = parse_date(cell(t, r, c_record), row, "record_date");
    const auto d = s.flight_date - s.record_date;
    if (d < 0)
      throw Error(ErrorCode::BadDate,
                  "record_date " + s.record_date.iso() + " is after flight_date " +
                      s.flight_date.iso(),
                  row);
    s.days_before_departure = static_cast<int>(d);
    s.booked_seats = parse_long(cell(t, r, c_booked), row, "booked_seats");
    s.total_seats = parse_long(cell(t, r, c_total), row, "total_seats");
    if (s.booked_seats < 0)
      throw Error(ErrorCode::NegativeSeats, "booked_seats = " + std::to_string(s.booked_seats), row);
    if (s.total_seats < 0)
      throw Error(ErrorCode::NegativeSeats, "total_seats = " + std::to_string(s.total_seats), row);
    if (s.total_seats == 0) throw Error(ErrorCode::ZeroCapacity, "total_seats = 0", row);
    s.aircraft_type = cell(t, r, c_aircraft);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<BookingSnapshot> parse_reservations(std::istream& in) {
  return reservations_from(csv::parse(in));
}

std::vector<BookingSnapshot> load_reservations(const std::filesystem::path& path) {
  return reservations_from(csv::read(path));
}

void write_reservations(std::ostream& out, const std::vector<BookingSnapshot>& rows) {
  csv::Writer w(out);
  w.row({"route_id", "flight_date", "record_date", "booked_seats", "total_seats", "aircraft_type"});
  for (const auto& s : rows)
    w.row({s.route_id, s.flight_date.iso(), s.record_date.iso(), std::to_string(s.booked_seats),
           std::to_string(s.total_seats), s.aircraft_type});
}

std::vector<Airport> load_airports(const std::filesystem::path& path) {
  auto t = csv::read(path);
  const auto c_iata = t.column("iata"), c_lat = t.column("latitude"), c_lon = t.column("longitude");
  std::vector<Airport> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    Airport a{cell(t, r, c_iata), parse_double(cell(t, r, c_lat), r + 1, "latitude"),
              parse_double(cell(t, r, c_lon), r + 1, "longitude")};
    if (a.iata.size() != 3)
      throw Error(ErrorCode::BadFormat, "IATA code must have 3 letters: '" + a.iata + "'", r + 1);
    if (a.latitude < -90 || a.latitude > 90 || a.longitude < -180 || a.longitude > 180)
      throw Error(ErrorCode::BadFormat, "coordinates out of range for " + a.iata, r + 1);
    out.push_back(std::move(a));
  }
  return out;
}

void write_airports(std::ostream& out, const std::vector<Airport>& airports) {
  csv::Writer w(out);
  w.row({"iata", "latitude", "longitude"});
  for (const auto& a : airports) w.row({a.iata, csv::format(a.latitude), csv::format(a.longitude)});
}

HolidayCalendar load_holidays(const std::filesystem::path& path) {
  auto t = csv::read(path);
  const auto c = t.column("date");
  HolidayCalendar cal;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    cal.dates.insert(parse_date(cell(t, r, c), r + 1, "date"));
  return cal;
}

void write_holidays(std::ostream& out, const HolidayCalendar& holidays) {
  csv::Writer w(out);
  w.row({"date"});
  for (const auto& d : holidays.dates) w.row({d.iso()});
}

std::vector<RouteMeta> load_routes(const std::filesystem::path& path,
                                   const std::vector<Airport>& airports) {
  auto t = csv::read(path);
  const auto c_id = t.column("route_id"), c_o = t.column("origin"), c_d = t.column("destination"),
             c_f = t.column("weekly_frequency"), c_r = t.column("reach"),
             c_s = t.column("service"), c_h = t.column("haul");
  auto find_airport = [&](const std::string& code, std::size_t row) -> const Airport& {
    for (const auto& a : airports)
      if (a.iata == code) return a;
    throw Error(ErrorCode::BadFormat, "unknown airport " + code, row);
  };
  std::vector<RouteMeta> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::size_t row = r + 1;
    RouteMeta m;
    m.route_id = cell(t, r, c_id);
    m.origin = cell(t, r, c_o);
    m.destination = cell(t, r, c_d);
    m.weekly_frequency = static_cast<int>(parse_long(cell(t, r, c_f), row, "weekly_frequency"));
    if (m.weekly_frequency <= 0)
      throw Error(ErrorCode::BadFormat, "weekly_frequency must be positive", row);
    m.frequency = m.weekly_frequency > kHighFrequencyThreshold ? Frequency::High : Frequency::Low;
    const auto& reach = cell(t, r, c_r);
    const auto& service = cell(t, r, c_s);
    const auto& haul = cell(t, r, c_h);
    if (reach == "domestic") m.reach = Reach::Domestic;
    else if (reach == "international") m.reach = Reach::International;
    else throw Error(ErrorCode::BadFormat, "reach must be domestic|international", row);
    if (service == "direct") m.service = Service::Direct;
    else if (service == "transit") m.service = Service::Transit;
    else throw Error(ErrorCode::BadFormat, "service must be direct|transit", row);
    if (haul == "short") m.haul = Haul::Short;
    else if (haul == "mid") m.haul = Haul::Mid;
    else if (haul == "long") m.haul = Haul::Long;
    else throw Error(ErrorCode::BadFormat, "haul must be short|mid|long", row);
    m.distance_km = route_distance(find_airport(m.origin, row), find_airport(m.destination, row));
    if (!(m.distance_km > 0))
      throw Error(ErrorCode::BadFormat, "route distance must be positive", row);
    out.push_back(std::move(m));
  }
  return out;
}

void write_routes(std::ostream& out, const std::vector<RouteMeta>& routes) {
  csv::Writer w(out);
  w.row({"route_id", "origin", "destination", "weekly_frequency", "reach", "service", "haul"});
  for (const auto& r : routes)
    w.row({r.route_id, r.origin, r.destination, std::to_string(r.weekly_frequency),
           to_string(r.reach), to_string(r.service), to_string(r.haul)});
}

std::vector<BookingSnapshot> aggregate_legs(const std::vector<BookingSnapshot>& snapshots,
                                            AggregateOptions options) {
  using Key = std::tuple<std::string, Date, Date>;
  std::map<Key, BookingSnapshot> merged;
  for (const auto& s : snapshots) {
    Key key{s.route_id, s.flight_date, s.record_date};
    auto [it, inserted] = merged.try_emplace(key, s);
    if (inserted) continue;
    auto& acc = it->second;
    if (options.strict_aircraft && acc.aircraft_type != s.aircraft_type)
      throw Error(ErrorCode::ConflictingAircraft,
                  s.route_id + " " + s.flight_date.iso() + ": " + acc.aircraft_type + " vs " +
                      s.aircraft_type);
    acc.booked_seats += s.booked_seats;
    acc.total_seats += s.total_seats;
  }
  std::vector<BookingSnapshot> out;
  out.reserve(merged.size());
  for (auto& [key, s] : merged) out.push_back(std::move(s));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.route_id, a.flight_date, a.days_before_departure) <
           std::tie(b.route_id, b.flight_date, b.days_before_departure);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator

GeneratorConfig GeneratorConfig::from(const KeyValueConfig& kv) {
  GeneratorConfig c;
  c.routes = static_cast<int>(kv.get_int("generator.routes", c.routes));
  c.flights_per_route = static_cast<int>(kv.get_int("generator.flights_per_route", c.flights_per_route));
  if (auto s = kv.get("generator.start_date")) {
    auto d = Date::parse(*s);
    if (!d) throw Error(ErrorCode::InvalidConfig, "generator.start_date is not YYYY-MM-DD");
    c.start_date = *d;
  }
  c.base_demand = kv.get_double("generator.base_demand", c.base_demand);
  c.demand_noise = kv.get_double("generator.demand_noise", c.demand_noise);
  c.demand_persistence = kv.get_double("generator.demand_persistence", c.demand_persistence);
  c.season_amplitude = kv.get_double("generator.season_amplitude", c.season_amplitude);
  c.weekday_amplitude = kv.get_double("generator.weekday_amplitude", c.weekday_amplitude);
  c.holiday_boost = kv.get_double("generator.holiday_boost", c.holiday_boost);
  c.late_surge = kv.get_double("generator.late_surge", c.late_surge);
  c.transit_double_peak = kv.get_double("generator.transit_double_peak", c.transit_double_peak);
  c.churn_rate = kv.get_double("generator.churn_rate", c.churn_rate);
  c.group_hold_prob = kv.get_double("generator.group_hold_prob", c.group_hold_prob);
  c.group_hold_size = kv.get_double("generator.group_hold_size", c.group_hold_size);
  c.nonlinear = kv.get_double("generator.nonlinear", c.nonlinear);
  c.validate();
  return c;
}

KeyValueConfig GeneratorConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("generator.routes", std::to_string(routes));
  kv.set("generator.flights_per_route", std::to_string(flights_per_route));
  kv.set("generator.start_date", start_date.iso());
  kv.set("generator.base_demand", csv::format(base_demand));
  kv.set("generator.demand_noise", csv::format(demand_noise));
  kv.set("generator.demand_persistence", csv::format(demand_persistence));
  kv.set("generator.season_amplitude", csv::format(season_amplitude));
  kv.set("generator.weekday_amplitude", csv::format(weekday_amplitude));
  kv.set("generator.holiday_boost", csv::format(holiday_boost));
  kv.set("generator.late_surge", csv::format(late_surge));
  kv.set("generator.transit_double_peak", csv::format(transit_double_peak));
  kv.set("generator.churn_rate", csv::format(churn_rate));
  kv.set("generator.group_hold_prob", csv::format(group_hold_prob));
  kv.set("generator.group_hold_size", csv::format(group_hold_size));
  kv.set("generator.nonlinear", csv::format(nonlinear));
  return kv;
}

void GeneratorConfig::validate() const {
  if (routes <= 0) throw Error(ErrorCode::InvalidConfig, "routes must be positive");
  if (flights_per_route <= 0) throw Error(ErrorCode::InvalidConfig, "flights_per_route must be positive");
  const std::pair<const char*, double> amplitudes[] = {
      {"base_demand", base_demand},
      {"demand_noise", demand_noise},
      {"demand_persistence", demand_persistence},
      {"season_amplitude", season_amplitude},
      {"weekday_amplitude", weekday_amplitude},
      {"holiday_boost", holiday_boost},
      {"late_surge", late_surge},
      {"transit_double_peak", transit_double_peak},
      {"churn_rate", churn_rate},
      {"group_hold_prob", group_hold_prob},
      {"group_hold_size", group_hold_size},
      {"nonlinear", nonlinear},
  };
  for (const auto& [name, value] : amplitudes)
    if (!(value >= 0.0 && value <= 1.0))
      throw Error(ErrorCode::InvalidConfig, std::string(name) + " must lie in [0, 1]");
  if (base_demand <= 0) throw Error(ErrorCode::InvalidConfig, "base_demand must be positive");
}

namespace {

struct RouteTemplate {
  const char* id;
  const char* origin;
  const char* destination;
  int weekly_frequency;
  Reach reach;
  Service service;
  Haul haul;
  const char* aircraft;
  long seats_per_leg;
  int legs;
  double demand_offset;
  double curve_power;  // direct routes: F(d) = (1 - d/31)^power
  double season_phase;
};

// Four routes spanning every category pair. High-frequency routes fly two
// departures a day and transit routes two legs; both are merged by
// aggregate_legs into one flight-date record.
constexpr RouteTemplate kRoster[] = {
    {"DAC-CXB", "DAC", "CXB", 14, Reach::Domestic, Service::Direct, Haul::Short, "B738", 162, 2,
     -0.10, 3.0, 0.0},
    {"DAC-CCU", "DAC", "CCU", 7, Reach::International, Service::Direct, Haul::Short, "B738", 162, 1,
     -0.02, 1.4, 1.3},
    {"DAC-DXB", "DAC", "DXB", 14, Reach::International, Service::Direct, Haul::Mid, "B77W", 419, 2,
     0.06, 1.1, 2.4},
    {"DAC-LHR", "DAC", "LHR", 7, Reach::International, Service::Transit, Haul::Long, "B788", 271, 2,
     0.04, 1.0, 4.0},
};

const Airport kAirports[] = {
    {"CCU", 22.6547, 88.4467}, {"CXB", 21.4522, 91.9639}, {"DAC", 23.8433, 90.3978},
    {"DXB", 25.2532, 55.3657}, {"LHR", 51.4700, -0.4543},
};

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Cumulative share of departure bookings present at d days out; F(0) = 1.
double booking_curve(const RouteTemplate& t, const GeneratorConfig& cfg, int d) {
  if (t.service == Service::Transit) {
    auto early = [](int x) { return logistic((22.0 - x) / 2.0) / logistic(11.0); };
    auto late = [](int x) { return logistic((5.0 - x) / 1.5) / logistic(5.0 / 1.5); };
    const double w = cfg.transit_double_peak;
    return w * early(d) + (1.0 - w) * late(d);
  }
  return std::pow(std::max(0.0, 1.0 - d / 31.0), t.curve_power);
}

HolidayCalendar make_holidays(Date first, Date last, Rng& rng) {
  HolidayCalendar cal;
  // Fixed-date public holidays.
  constexpr std::pair<unsigned, unsigned> fixed[] = {{2, 21}, {3, 17}, {3, 26}, {4, 14},
                                                     {5, 1},  {8, 15}, {12, 16}, {12, 25}};
  for (int y = first.year(); y <= last.year(); ++y) {
    for (auto [m, d] : fixed) cal.dates.insert(Date(y, m, d));
    // Movable multi-day festivals drift through the solar year.
    for (int festival = 0; festival < 2; ++festival) {
      const int start = static_cast<int>(rng.below(330)) + 10;
      const Date base = Date(y, 1, 1) + start;
      for (int k = 0; k < 3; ++k) cal.dates.insert(base + k);
    }
    for (int k = 0; k < 3; ++k) cal.dates.insert(Date(y, 1, 1) + static_cast<int>(rng.below(360)));
  }
  return cal;
}

}  // namespace

SyntheticCorpus generate_synthetic(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  SyntheticCorpus corpus;
  corpus.airports.assign(std::begin(kAirports), std::end(kAirports));

  const Date first_record = cfg.start_date - 30;
  const Date last_flight = cfg.start_date + (cfg.flights_per_route - 1);
  corpus.holidays = make_holidays(first_record, last_flight, rng);

  constexpr int kRosterSize = static_cast<int>(std::size(kRoster));
  for (int r = 0; r < cfg.routes; ++r) {
    const RouteTemplate& t = kRoster[r % kRosterSize];
    RouteMeta meta;
    meta.route_id = t.id;
    if (r >= kRosterSize) meta.route_id += "-" + std::to_string(r / kRosterSize + 1);
    meta.origin = t.origin;
    meta.destination = t.destination;
    meta.weekly_frequency = t.weekly_frequency;
    meta.reach = t.reach;
    meta.service = t.service;
    meta.frequency = t.weekly_frequency > kHighFrequencyThreshold ? Frequency::High : Frequency::Low;
    meta.haul = t.haul;
    auto airport = [&](const char* code) {
      for (const auto& a : corpus.airports)
        if (a.iata == code) return a;
      return Airport{};
    };
    meta.distance_km = route_distance(airport(t.origin), airport(t.destination));
    corpus.routes.push_back(meta);

    Rng route_rng(rng.fork());
    const long capacity = t.seats_per_leg * t.legs;
    double persistent = 0.0;
    const double weekday_phase = route_rng.uniform(0.0, 2.0 * std::numbers::pi);

    for (int f = 0; f < cfg.flights_per_route; ++f) {
      const Date flight = cfg.start_date + f;

      // Departure demand as a fraction of capacity.
      persistent = cfg.demand_persistence * persistent +
                   std::sqrt(1.0 - cfg.demand_persistence * cfg.demand_persistence) *
                       cfg.demand_noise * route_rng.normal();
      const double idiosyncratic = cfg.demand_noise * route_rng.normal();
      const double doy = flight.day_of_year();
      double demand = cfg.base_demand + t.demand_offset +
                      cfg.season_amplitude * std::sin(2.0 * std::numbers::pi * doy / 365.25 + t.season_phase) +
                      cfg.weekday_amplitude *
                          std::cos(2.0 * std::numbers::pi * flight.day_of_week() / 7.0 + weekday_phase) +
                      persistent + idiosyncratic;
      if (corpus.holidays.contains(flight)) demand += cfg.holiday_boost;
      else if (corpus.holidays.contains(flight + 1)) demand += 0.5 * cfg.holiday_boost;
      demand = std::clamp(demand, 0.05, 1.05);
      const double expected_seats = demand * static_cast<double>(capacity);
      const double pace = std::exp(0.15 * route_rng.normal());

      // Late-week components: surge bookings, seat-level churn, group holds.
      double surge_total = static_cast<double>(capacity) * cfg.late_surge * std::abs(route_rng.normal());
      // Planted nonlinearity: mid-month departures draw a promotional last-week surge.
      if (flight.day() >= 11 && flight.day() <= 20) surge_total += static_cast<double>(capacity) * 0.35 * cfg.nonlinear;
      const bool churn_enabled = cfg.churn_rate > 0.0;
      const bool hold = churn_enabled && route_rng.bernoulli(cfg.group_hold_prob);
      const int hold_day = 2 + static_cast<int>(route_rng.below(6));  // 2..7
      const long hold_size = std::lround(static_cast<double>(capacity) * cfg.group_hold_size *
                                         route_rng.uniform(0.6, 1.4));
      const bool hold_released = route_rng.bernoulli(0.5);
      const int release_day = 1 + static_cast<int>(route_rng.below(static_cast<std::uint64_t>(hold_day - 1)));

      long organic = 0;    // non-decreasing curve-following bookings
      long surge = 0;
      long cancelled = 0;
      std::array<long, 31> booked{};
      for (int d = 30; d >= 0; --d) {
        const double level = expected_seats * std::pow(booking_curve(t, cfg, d), pace) *
                             (1.0 + 0.03 * route_rng.normal());
        organic = std::max(organic, std::lround(std::max(0.0, level)));
        if (d <= 7 && d >= 1) surge = std::lround(surge_total * (8 - d) / 7.0);
        long total = organic + surge - cancelled;
        if (d <= 7 && churn_enabled) {
          const long gone = route_rng.binomial(std::max(0L, total), cfg.churn_rate);
          cancelled += gone;
          total -= gone;
        }
        if (hold && d <= hold_day && !(hold_released && d <= release_day)) total += hold_size;
        booked[static_cast<std::size_t>(d)] = std::max(0L, total);
      }

      for (int d = 30; d >= 0; --d) {
        const long b = booked[static_cast<std::size_t>(d)];
        long remaining = b;
        for (int leg = 0; leg < t.legs; ++leg) {
          BookingSnapshot s;
          s.route_id = meta.route_id;
          s.flight_date = flight;
          s.record_date = flight - d;
          s.days_before_departure = d;
          s.booked_seats = leg + 1 == t.legs ? remaining : b / t.legs;
          remaining -= s.booked_seats;
          s.total_seats = t.seats_per_leg;
          s.aircraft_type = t.aircraft;
          corpus.snapshots.push_back(std::move(s));
        }
      }
    }
  }
  return corpus;
}

}  // namespace loadcast
