#pragma once

#include <stdexcept>
#include <string>

namespace maskprobe {

// Base of every error this library throws deliberately.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Grid shapes disagree where they must match.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A scalar argument is outside its admissible range (thresholds,
// ratios, invalid normalization statistics).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Input outside a function's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Bad or unknown configuration (unknown architecture id, malformed
// config file, unknown keys).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// An optimization produced a non-finite value; carries a short trace.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// A frozen-network or similar API contract was violated.
class ContractViolationError : public Error {
 public:
  using Error::Error;
};

// A required artifact (checkpoint, dataset, report) is missing.
class MissingDependencyError : public Error {
 public:
  using Error::Error;
};

// Degenerate scene geometry.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// An analysis cannot proceed (e.g. no sparseness overlap).
class AnalysisError : public Error {
 public:
  using Error::Error;
};

}  // namespace maskprobe
