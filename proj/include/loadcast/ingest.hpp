#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "loadcast/calendar.hpp"
#include "loadcast/config.hpp"

namespace loadcast {

// One daily observation of one flight's booking state.
struct BookingSnapshot {
  std::string route_id;
  Date flight_date;
  Date record_date;
  int days_before_departure = 0;
  long booked_seats = 0;
  long total_seats = 0;
  std::string aircraft_type;

  bool overbooked() const { return booked_seats > total_seats; }
  friend bool operator==(const BookingSnapshot&, const BookingSnapshot&) = default;
};

struct Airport {
  std::string iata;
  double latitude = 0;   // degrees
  double longitude = 0;  // degrees
};

struct HolidayCalendar {
  std::set<Date> dates;
  bool contains(const Date& d) const { return dates.count(d) != 0; }
};

enum class Reach { Domestic, International };
enum class Service { Direct, Transit };
enum class Frequency { High, Low };
enum class Haul { Short, Mid, Long };

std::string to_string(Reach);
std::string to_string(Service);
std::string to_string(Frequency);
std::string to_string(Haul);

// Routes flying more than this many times per week are tagged high-frequency.
inline constexpr int kHighFrequencyThreshold = 7;

struct RouteMeta {
  std::string route_id;
  std::string origin;
  std::string destination;
  double distance_km = 0;
  int weekly_frequency = 0;
  Reach reach = Reach::Domestic;
  Service service = Service::Direct;
  Frequency frequency = Frequency::Low;
  Haul haul = Haul::Short;
};

// Great-circle (haversine) distance on a sphere of radius 6,371 km.
inline constexpr double kEarthRadiusKm = 6371.0;
double route_distance(const Airport& origin, const Airport& destination);

std::vector<BookingSnapshot> load_reservations(const std::filesystem::path& path);
std::vector<BookingSnapshot> parse_reservations(std::istream& in);
void write_reservations(std::ostream& out, const std::vector<BookingSnapshot>& rows);

std::vector<Airport> load_airports(const std::filesystem::path& path);
void write_airports(std::ostream& out, const std::vector<Airport>& airports);

HolidayCalendar load_holidays(const std::filesystem::path& path);
void write_holidays(std::ostream& out, const HolidayCalendar& holidays);

// routes.csv carries no distance; it is resolved from the airport table.
std::vector<RouteMeta> load_routes(const std::filesystem::path& path,
                                   const std::vector<Airport>& airports);
void write_routes(std::ostream& out, const std::vector<RouteMeta>& routes);

struct AggregateOptions {
  // Throw ConflictingAircraft when merged legs disagree on aircraft type.
  bool strict_aircraft = false;
};

// Merges snapshots sharing (route_id, flight_date, record_date) by summing
// seats; output sorted by (route_id, flight_date, days_before_departure).
std::vector<BookingSnapshot> aggregate_legs(const std::vector<BookingSnapshot>& snapshots,
                                            AggregateOptions options = {});

// Synthetic stand-in for the proprietary reservation feed. All amplitudes are
// fractions of capacity in [0, 1].
struct GeneratorConfig {
  int routes = 4;
  int flights_per_route = 413;
  Date start_date{2023, 1, 1};
  double base_demand = 0.76;         // mean departure load factor
  double demand_noise = 0.07;        // flight-level idiosyncratic sd
  double demand_persistence = 0.6;   // AR(1) coefficient across consecutive flights
  double season_amplitude = 0.06;
  double weekday_amplitude = 0.04;
  double holiday_boost = 0.10;
  double late_surge = 0.08;          // random last-week demand, sd as capacity fraction
  double transit_double_peak = 0.5;  // weight of the early hump on transit routes
  double churn_rate = 0.01;          // per-seat daily cancellation probability, last week
  double group_hold_prob = 0.25;     // chance of a group hold appearing in the last week
  double group_hold_size = 0.12;     // hold size as capacity fraction
  double nonlinear = 0.0;            // extra last-week demand for departures on days 11-20 of the month

  static GeneratorConfig from(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
  void validate() const;
};

struct SyntheticCorpus {
  std::vector<BookingSnapshot> snapshots;  // leg-level, as a raw feed would be
  std::vector<RouteMeta> routes;
  std::vector<Airport> airports;
  HolidayCalendar holidays;
};

SyntheticCorpus generate_synthetic(const GeneratorConfig& config, std::uint64_t seed);

}  // namespace loadcast
