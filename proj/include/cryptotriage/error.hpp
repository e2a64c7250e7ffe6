#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cryptotriage {

enum class Errc {
  io,
  validation,
  duplicate_address,
  empty_graph,
  unknown_node,
  dimension_mismatch,
  divergence,
  schema_mismatch,
  insufficient_neighborhood,
  invalid_state,
  duplicate,
  not_found,
  auth_failure,
  rate_limited,
  transport,
  parse,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::io: return "io";
    case Errc::validation: return "validation";
    case Errc::duplicate_address: return "duplicate_address";
    case Errc::empty_graph: return "empty_graph";
    case Errc::unknown_node: return "unknown_node";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::divergence: return "divergence";
    case Errc::schema_mismatch: return "schema_mismatch";
    case Errc::insufficient_neighborhood: return "insufficient_neighborhood";
    case Errc::invalid_state: return "invalid_state";
    case Errc::duplicate: return "duplicate";
    case Errc::not_found: return "not_found";
    case Errc::auth_failure: return "auth_failure";
    case Errc::rate_limited: return "rate_limited";
    case Errc::transport: return "transport";
    case Errc::parse: return "parse";
  }
  return "unknown";
}

/// Base exception for every failure the library reports. The code is stable and
/// is what the HTTP layer and the CLI map to status codes.
class TriageError : public std::runtime_error {
 public:
  TriageError(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace cryptotriage
