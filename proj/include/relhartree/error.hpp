#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace relhartree {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidParameter {
 public:
  using InvalidParameter::InvalidParameter;
};

class InvalidSample : public InvalidParameter {
 public:
  using InvalidParameter::InvalidParameter;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Chemical potential sits within the gap tolerance of one or more eigenvalues.
class DegenerateThreshold : public Error {
 public:
  DegenerateThreshold(const std::string& what, std::vector<long> indices)
      : Error(what), indices_(std::move(indices)) {}
  const std::vector<long>& indices() const { return indices_; }

 private:
  std::vector<long> indices_;
};

// Self-consistent midpoint loop did not reach its tolerance.
class StepError : public Error {
 public:
  StepError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string field = {}, int line = 0)
      : Error(what), field_(std::move(field)), line_(line) {}
  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  std::string field_;
  int line_;
};

}  // namespace relhartree
