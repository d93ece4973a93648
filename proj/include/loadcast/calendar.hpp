#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace loadcast {

// Calendar date with whole-day arithmetic. Backed by std::chrono::sys_days.
class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::sys_days days) : days_(days) {}
  Date(int year, unsigned month, unsigned day);

  // Strict YYYY-MM-DD; returns nullopt on anything else, including
  // impossible dates such as 2023-02-30.
  static std::optional<Date> parse(std::string_view text);

  std::string iso() const;

  int year() const;
  unsigned month() const;         // 1..12
  unsigned day() const;           // 1..31
  unsigned day_of_year() const;   // 1..366
  unsigned day_of_week() const;   // 0 = Monday .. 6 = Sunday
  unsigned iso_week() const;      // 1..53

  std::int64_t serial() const { return days_.time_since_epoch().count(); }

  Date operator+(int days) const { return Date(days_ + std::chrono::days(days)); }
  Date operator-(int days) const { return Date(days_ - std::chrono::days(days)); }
  friend std::int64_t operator-(const Date& a, const Date& b) {
    return (a.days_ - b.days_).count();
  }

  friend bool operator==(const Date&, const Date&) = default;
  friend auto operator<=>(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days days_{};
};

}  // namespace loadcast
