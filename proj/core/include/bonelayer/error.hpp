#pragma once

#include <stdexcept>
#include <string>

namespace bonelayer {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a precondition (shape mismatch, out-of-range parameter,
/// malformed mask).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Raster or config file could not be read or written.
class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// An iterative solver stopped without meeting its tolerance, or the problem
/// it was handed has no solution.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

}  // namespace bonelayer
