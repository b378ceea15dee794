#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bprec {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(Index expected, Index actual, const std::string& where = {})
      : Error((where.empty() ? std::string("dimension mismatch")
                             : where + ": dimension mismatch") +
              " (expected " + std::to_string(expected) + ", got " +
              std::to_string(actual) + ")"),
        expected_(expected),
        actual_(actual) {}

  Index expected() const { return expected_; }
  Index actual() const { return actual_; }

 private:
  Index expected_;
  Index actual_;
};

/// Raised when a factorization meets a non-positive pivot.
/// `index()` is the pivot (or block) position that failed.
class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(Index index, const std::string& what = "matrix")
      : Error(what + " is not positive definite (pivot " + std::to_string(index) + ")"),
        index_(index) {}

  Index index() const { return index_; }

 private:
  Index index_;
};

class IndefiniteInput : public Error {
 public:
  using Error::Error;
};

class RankDeficientSketch : public Error {
 public:
  using Error::Error;
};

class ZeroSketch : public Error {
 public:
  using Error::Error;
};

class IllConditionedCore : public Error {
 public:
  using Error::Error;
};

class HypothesisViolated : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

inline void check_dim(Index expected, Index actual, const char* where) {
  if (expected != actual) throw DimensionMismatch(expected, actual, where);
}

}  // namespace bprec
