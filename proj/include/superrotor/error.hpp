#ifndef SUPERROTOR_ERROR_HPP
#define SUPERROTOR_ERROR_HPP

#include <stdexcept>
#include <string>

namespace superrotor {

// Input that violates a documented schema or domain invariant.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical guard tripped (truncation boundary reached, step size rejected, ...).
class NumericalGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thermal tail does not fit in the requested basis.
class TruncationError : public NumericalGuardError {
 public:
  TruncationError(const std::string& what, int required_n_max)
      : NumericalGuardError(what), required_n_max_(required_n_max) {}
  int required_n_max() const { return required_n_max_; }

 private:
  int required_n_max_;
};

}  // namespace superrotor

#endif  // SUPERROTOR_ERROR_HPP
