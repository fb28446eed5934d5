#pragma once

#include <stdexcept>
#include <string>

namespace smhd {

/// Configuration or parameter invariant violated (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Time step exceeds the admissible transport step.
class CflError : public std::runtime_error {
 public:
  CflError(const std::string& what, double admissible_dt)
      : std::runtime_error(what), admissible_dt_(admissible_dt) {}
  double admissible_dt() const { return admissible_dt_; }

 private:
  double admissible_dt_;
};

/// Density lost strict positivity where the scheme needs it.
class PositivityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace smhd
