#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace monofill {

/// Bad caller input: wrong shapes, out-of-range parameters, malformed files.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An object was used in a state that does not permit the call
/// (e.g. backward on a stale tape).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// File could not be read or written. The message always names the path.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Numerical failure: non-finite values, solver breakdown, non-convergence.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training diverged or produced a non-finite loss.
class TrainingError : public NumericError {
 public:
  TrainingError(int level, std::size_t iteration, const std::string& what)
      : NumericError("level " + std::to_string(level) + ", iteration " +
                     std::to_string(iteration) + ": " + what),
        level_(level),
        iteration_(iteration) {}
  int level() const noexcept { return level_; }
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  int level_;
  std::size_t iteration_;
};

}  // namespace monofill
