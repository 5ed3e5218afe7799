#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stwind {

// Broad failure class; maps one-to-one onto the C API status codes and the
// CLI exit codes.
enum class ErrorClass {
  config = 2,
  data = 3,
  numeric = 4,
};

// Fine-grained reason, reported as the machine-readable code on failure.
enum class ErrorKind {
  config,       // malformed or unknown configuration
  parameter,    // argument outside its domain
  io,           // file could not be opened / written
  schema,       // malformed header or field layout
  duplicate,    // duplicate (station, timestamp)
  dimension,    // shape mismatch or S > T
  imputation,   // a missing cell with no available neighbour
  extent,       // query point outside a grid
  completeness, // missing values where none are allowed
  evaluation,   // empty test set
  geometry,     // invalid log-law heights
  singular,     // singular normal equations
  selection,    // every GCV candidate degenerate
  dof,          // not enough degrees of freedom
  ensemble,     // ensemble too small for variance estimation
  fit,          // nonlinear fit did not converge
  numeric,      // non-finite values
  range,        // index outside the modelled range
};

ErrorClass class_of(ErrorKind kind) noexcept;
std::string_view kind_name(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorClass error_class() const noexcept { return class_of(kind_); }

private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

} // namespace stwind
