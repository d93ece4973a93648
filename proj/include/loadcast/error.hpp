#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace loadcast {

enum class ErrorCode {
  MissingColumn,
  BadDate,
  NegativeSeats,
  BadNumber,
  ConflictingAircraft,
  InvalidConfig,
  ZeroCapacity,
  UnknownRoute,
  InsufficientHistory,
  EmptyPartition,
  ShapeMismatch,
  IllegalSpec,
  DivergenceDetected,
  BadFormat,
  MissingInput,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the toolkit. Row numbers are 1-based data rows
// (the header is row 0) when the error comes from a tabular input.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> row = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> row() const noexcept { return row_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> row_;
};

}  // namespace loadcast
