#pragma once

#include "capstruct/types.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace capstruct {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (e.g. theta not in (0,1)).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input data that violates a structural precondition.
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class RankDeficientError : public DataError {
 public:
  RankDeficientError(const std::string& what, std::vector<std::string> columns)
      : DataError(what), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
};

/// The solver could not certify optimality within its iteration budget.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Vector best_iterate, int iterations, double gap)
      : Error(what), best_(std::move(best_iterate)), iterations_(iterations), gap_(gap) {}
  const Vector& best_iterate() const { return best_; }
  int iterations() const { return iterations_; }
  double duality_gap() const { return gap_; }

 private:
  Vector best_;
  int iterations_;
  double gap_;
};

}  // namespace capstruct
