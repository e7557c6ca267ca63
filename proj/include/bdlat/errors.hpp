#pragma once

#include <stdexcept>
#include <string>

namespace bdlat {

// Bad user input: parameters, config files, kernel families.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A rate model produced a value it is not allowed to produce (NaN, negative).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A structural condition failed to verify (kernel inequality, evenness).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thinning bound fell below the rate it was supposed to dominate.
class EnvelopeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ExplosionError : public std::runtime_error {
 public:
  ExplosionError(const std::string& what, double time, unsigned long long events)
      : std::runtime_error(what), time_(time), events_(events) {}
  double time() const { return time_; }
  unsigned long long events() const { return events_; }

 private:
  double time_;
  unsigned long long events_;
};

}  // namespace bdlat
