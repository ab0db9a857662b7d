#pragma once

#include <stdexcept>
#include <string>

namespace autoriesz {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorCategory { usage = 2, schema = 3, numerical = 4, io = 5 };

inline const char* to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::schema: return "schema";
    case ErrorCategory::numerical: return "numerical";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ErrorCategory::usage, what) {}
};

struct SchemaError : Error {
  explicit SchemaError(const std::string& what) : Error(ErrorCategory::schema, what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error(ErrorCategory::numerical, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

/// Malformed estimand document. Syntax errors carry a 1-based line/column.
struct SpecError : SchemaError {
  SpecError(const std::string& what, int line = 0, int column = 0)
      : SchemaError(line > 0 ? "line " + std::to_string(line) + ", column " +
                                   std::to_string(column) + ": " + what
                             : what),
        line(line),
        column(column) {}
  int line;
  int column;
};

}  // namespace autoriesz
