#pragma once

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ghtree {

// Default comparison tolerance for all floating-point predicates.
inline constexpr double kDefaultTol = 1e-9;

enum class ErrorCode {
  invalid_argument,
  not_square,
  empty_subset,
  index_out_of_range,
  unknown_vertex,
  cycle,
  disconnected,
  nonpositive_length,
  duplicate_id,
  length_mismatch,
  overlapping_segments,
  size_cap_exceeded,
  not_covering,
  no_certified_star,
  ambiguous_star,
  schema,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::not_square: return "not_square";
    case ErrorCode::empty_subset: return "empty_subset";
    case ErrorCode::index_out_of_range: return "index_out_of_range";
    case ErrorCode::unknown_vertex: return "unknown_vertex";
    case ErrorCode::cycle: return "cycle";
    case ErrorCode::disconnected: return "disconnected";
    case ErrorCode::nonpositive_length: return "nonpositive_length";
    case ErrorCode::duplicate_id: return "duplicate_id";
    case ErrorCode::length_mismatch: return "length_mismatch";
    case ErrorCode::overlapping_segments: return "overlapping_segments";
    case ErrorCode::size_cap_exceeded: return "size_cap_exceeded";
    case ErrorCode::not_covering: return "not_covering";
    case ErrorCode::no_certified_star: return "no_certified_star";
    case ErrorCode::ambiguous_star: return "ambiguous_star";
    case ErrorCode::schema: return "schema";
  }
  return "unknown";
}

// Every precondition failure in the library surfaces as this type. `witness`
// carries the offending indices when there are any (cycle edge endpoints,
// uncovered point, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::vector<std::size_t> witness = {})
      : std::runtime_error(what), code_(code), witness_(std::move(witness)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::size_t>& witness() const noexcept { return witness_; }

 private:
  ErrorCode code_;
  std::vector<std::size_t> witness_;
};

// 12 significant digits; the canonical decimal rendering for reports.
inline std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

}  // namespace ghtree
