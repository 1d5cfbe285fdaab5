#pragma once

#include <stdexcept>
#include <string>

namespace mixbil {

enum class Errc {
  not_symmetric,
  not_positive_definite,
  dimension_mismatch,
  non_finite_iterate,
  tape_mismatch,
  stage_diverged,
  too_large,
  infeasible,
  io,
  schema_version_mismatch,
  checksum_mismatch,
  config,
};

constexpr const char* errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::not_symmetric: return "NotSymmetric";
    case Errc::not_positive_definite: return "NotPositiveDefinite";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::non_finite_iterate: return "NonFiniteIterate";
    case Errc::tape_mismatch: return "TapeMismatch";
    case Errc::stage_diverged: return "StageDiverged";
    case Errc::too_large: return "TooLarge";
    case Errc::infeasible: return "Infeasible";
    case Errc::io: return "IoError";
    case Errc::schema_version_mismatch: return "SchemaVersionMismatch";
    case Errc::checksum_mismatch: return "ChecksumMismatch";
    case Errc::config: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

  /// Numerical failures map to CLI exit code 2, everything else to 1.
  bool is_numerical() const noexcept {
    return code_ == Errc::not_positive_definite || code_ == Errc::non_finite_iterate ||
           code_ == Errc::stage_diverged;
  }

 private:
  Errc code_;
};

}  // namespace mixbil
