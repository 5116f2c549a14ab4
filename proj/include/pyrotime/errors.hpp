#pragma once

#include <stdexcept>
#include <string>

namespace pyrotime {

/// Malformed or inconsistent input data (files, records, rasters).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input text does not follow its documented schema.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

/// A record could not be parsed; carries the 1-based line number.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Summary has no burned pixel to report on.
class NoFireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss or parameter became non-finite during training.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(long step, const std::string& what)
      : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + what),
        step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace pyrotime
