#pragma once

#include <stdexcept>
#include <string>

namespace etkf {

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SizeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NotSymmetric : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EigenFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInflation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteState : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NotContracting : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace etkf
