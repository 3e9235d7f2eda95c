#pragma once

#include <stdexcept>
#include <string>

namespace pfcast {

// Process exit codes used by the command-line front end.
enum class ExitCode : int {
  ok = 0,
  usage = 1,
  data = 2,
  numeric = 3,
};

class Error : public std::runtime_error {
 public:
  Error(const std::string& what, ExitCode code) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(what, ExitCode::usage) {}
};

/// Bad input data: unreadable files, schema mismatches, broken references,
/// contract violations on arguments.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what, ExitCode::data) {}
};

class IoError : public DataError {
 public:
  explicit IoError(const std::string& what) : DataError(what) {}
};

class SchemaError : public DataError {
 public:
  explicit SchemaError(const std::string& what) : DataError(what) {}
};

class ValidationError : public DataError {
 public:
  explicit ValidationError(const std::string& what) : DataError(what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what, ExitCode::numeric) {}
};

}  // namespace pfcast
