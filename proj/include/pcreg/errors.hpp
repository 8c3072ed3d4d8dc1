#pragma once

#include <stdexcept>
#include <string>

namespace pcreg {

// Error categories map 1:1 onto CLI exit codes: usage -> 2, data -> 3,
// numeric -> 4.
enum class ErrorCategory { usage, data, numeric };

class Error : public std::runtime_error {
  public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}
    ErrorCategory category() const { return category_; }

  private:
    ErrorCategory category_;
};

inline const char* category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::usage: return "usage";
        case ErrorCategory::data: return "data";
        case ErrorCategory::numeric: return "numeric";
    }
    return "unknown";
}

class InvalidArgumentError : public Error {
  public:
    explicit InvalidArgumentError(const std::string& what)
        : Error(ErrorCategory::usage, what) {}
};

class ConfigError : public Error {
  public:
    explicit ConfigError(const std::string& what)
        : Error(ErrorCategory::usage, what) {}
};

class ShapeError : public Error {
  public:
    explicit ShapeError(const std::string& what)
        : Error(ErrorCategory::usage, what) {}
};

class InsufficientPointsError : public Error {
  public:
    explicit InsufficientPointsError(const std::string& what)
        : Error(ErrorCategory::data, what) {}
};

class EmptySetError : public Error {
  public:
    explicit EmptySetError(const std::string& what)
        : Error(ErrorCategory::data, what) {}
};

class EmptyDatasetError : public Error {
  public:
    explicit EmptyDatasetError(const std::string& what)
        : Error(ErrorCategory::data, what) {}
};

// Positioned parse failure for file readers.
class ParseError : public Error {
  public:
    ParseError(const std::string& path, long line, const std::string& what)
        : Error(ErrorCategory::data,
                path + ":" + std::to_string(line) + ": " + what),
          path_(path), line_(line) {}
    const std::string& path() const { return path_; }
    long line() const { return line_; }

  private:
    std::string path_;
    long line_;
};

class IoError : public Error {
  public:
    explicit IoError(const std::string& what)
        : Error(ErrorCategory::data, what) {}
};

class DegenerateInputError : public Error {
  public:
    explicit DegenerateInputError(const std::string& what)
        : Error(ErrorCategory::numeric, what) {}
};

class DegenerateCorrespondencesError : public Error {
  public:
    explicit DegenerateCorrespondencesError(const std::string& what)
        : Error(ErrorCategory::numeric, what) {}
};

class NoOverlapError : public Error {
  public:
    NoOverlapError(int iteration, const std::string& what)
        : Error(ErrorCategory::numeric, what), iteration_(iteration) {}
    int iteration() const { return iteration_; }

  private:
    int iteration_;
};

class DivergenceError : public Error {
  public:
    explicit DivergenceError(const std::string& what)
        : Error(ErrorCategory::numeric, what) {}
};

class CacheMismatchError : public Error {
  public:
    explicit CacheMismatchError(const std::string& what)
        : Error(ErrorCategory::usage, what) {}
};

}  // namespace pcreg
