#include "loadcast/calendar.hpp"

#include <charconv>
#include <cstdio>

#include "loadcast/error.hpp"

namespace loadcast {

using namespace std::chrono;

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::BadDate: return "BadDate";
    case ErrorCode::NegativeSeats: return "NegativeSeats";
    case ErrorCode::BadNumber: return "BadNumber";
    case ErrorCode::ConflictingAircraft: return "ConflictingAircraft";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ZeroCapacity: return "ZeroCapacity";
    case ErrorCode::UnknownRoute: return "UnknownRoute";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::EmptyPartition: return "EmptyPartition";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IllegalSpec: return "IllegalSpec";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::BadFormat: return "BadFormat";
    case ErrorCode::MissingInput: return "MissingInput";
  }
  return "Unknown";
}

namespace {
std::string decorate(ErrorCode code, const std::string& message,
                     std::optional<std::size_t> row) {
  std::string out(to_string(code));
  if (row) out += " (row " + std::to_string(*row) + ")";
  out += ": ";
  out += message;
  return out;
}
}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> row)
    : std::runtime_error(decorate(code, message, row)), code_(code), row_(row) {}

Date::Date(int y, unsigned m, unsigned d)
    : days_(sys_days(year_month_day(std::chrono::year(y), std::chrono::month(m), std::chrono::day(d)))) {}

std::optional<Date> Date::parse(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto num = [&](std::size_t pos, std::size_t len, int& out) {
    auto first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, out);
    return ec == std::errc() && ptr == first + len;
  };
  int y = 0, m = 0, d = 0;
  if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return std::nullopt;
  year_month_day ymd{std::chrono::year(y), std::chrono::month(static_cast<unsigned>(m)),
                     std::chrono::day(static_cast<unsigned>(d))};
  if (!ymd.ok()) return std::nullopt;
  return Date(sys_days(ymd));
}

std::string Date::iso() const {
  year_month_day ymd(days_);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int Date::year() const { return static_cast<int>(year_month_day(days_).year()); }
unsigned Date::month() const {
  return static_cast<unsigned>(year_month_day(days_).month());
}
unsigned Date::day() const { return static_cast<unsigned>(year_month_day(days_).day()); }

unsigned Date::day_of_year() const {
  auto jan1 = sys_days(year_month_day(year_month_day(days_).year(), January, 1d));
  return static_cast<unsigned>((days_ - jan1).count()) + 1;
}

unsigned Date::day_of_week() const {
  return weekday(days_).iso_encoding() - 1;
}

unsigned Date::iso_week() const {
  // The ISO year is the year of the Thursday in the same week.
  auto thursday = days_ + std::chrono::days(3 - static_cast<int>(day_of_week()));
  auto iso_year = year_month_day(thursday).year();
  auto jan1 = sys_days(year_month_day(iso_year, January, 1d));
  return static_cast<unsigned>((thursday - jan1).count() / 7) + 1;
}

}  // namespace loadcast
