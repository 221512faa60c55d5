#pragma once

#include <stdexcept>
#include <string>

namespace phtp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotSymmetric : public Error {
 public:
  using Error::Error;
};

class NotPSD : public Error {
 public:
  using Error::Error;
};

/// No eigenvalue of R lies above the kernel threshold, so sigma_plus is undefined.
class NoGap : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

class UnstableStep : public Error {
 public:
  UnstableStep(const std::string& what, double max_dt) : Error(what), max_dt_(max_dt) {}
  double max_dt() const noexcept { return max_dt_; }

 private:
  double max_dt_;
};

class HorizonTooShort : public Error {
 public:
  using Error::Error;
};

/// Invalid model, problem or experiment configuration. `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace phtp
