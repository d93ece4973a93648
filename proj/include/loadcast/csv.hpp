#pragma once

#include <cstddef>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace loadcast::csv {

// Minimal comma-separated table. No quoting: none of the toolkit's schemas
// contain commas inside fields.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws MissingColumn when absent.
  std::size_t column(std::string_view name) const;
};

Table read(const std::filesystem::path& path);
Table parse(std::istream& in);

// Shortest round-trip representation; identical bits always give identical
// text, which keeps output digests stable.
std::string format(double value);

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void row(const std::vector<std::string>& cells);
  void row(std::initializer_list<std::string> cells);

 private:
  std::ostream& out_;
};

}  // namespace loadcast::csv
