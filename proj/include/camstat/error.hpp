#pragma once

#include <stdexcept>
#include <string>

namespace camstat {

// Broad classes of failure. The CLI maps configuration problems to exit
// code 2 and everything that originates in the data to exit code 3.
enum class ErrorKind {
  configuration,
  data,
  dimension,
  parameter,
  degenerate_variance,
  degenerate_class,
  degenerate_split,
  instability,
  bundle,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::configuration, w) {}
};

struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorKind::data, w) {}
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error(ErrorKind::dimension, w) {}
};

struct ParameterError : Error {
  explicit ParameterError(const std::string& w) : Error(ErrorKind::parameter, w) {}
};

struct DegenerateVarianceError : Error {
  explicit DegenerateVarianceError(const std::string& w)
      : Error(ErrorKind::degenerate_variance, w) {}
};

struct DegenerateClassError : Error {
  explicit DegenerateClassError(const std::string& w)
      : Error(ErrorKind::degenerate_class, w) {}
};

struct DegenerateSplitError : Error {
  explicit DegenerateSplitError(const std::string& w)
      : Error(ErrorKind::degenerate_split, w) {}
};

struct InstabilityError : Error {
  explicit InstabilityError(const std::string& w) : Error(ErrorKind::instability, w) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};

// Exit code contract of the command line tool.
inline int exit_code_for(ErrorKind kind) noexcept {
  return kind == ErrorKind::configuration ? 2 : 3;
}

}  // namespace camstat
