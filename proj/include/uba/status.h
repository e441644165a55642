#ifndef UBA_STATUS_H_
#define UBA_STATUS_H_

#include <stdexcept>
#include <string>

namespace uba {

// Base class for every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed arguments that violate an operation's preconditions.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class UnknownCategoryError : public Error {
 public:
  UnknownCategoryError(std::string dimension, std::string value)
      : Error("unknown category '" + value + "' for dimension " + dimension),
        dimension_(std::move(dimension)),
        value_(std::move(value)) {}

  const std::string& dimension() const { return dimension_; }
  const std::string& value() const { return value_; }

 private:
  std::string dimension_;
  std::string value_;
};

class MissingFieldError : public Error {
 public:
  explicit MissingFieldError(std::string field)
      : Error("missing field " + field), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// A log line could not be parsed. `line_number` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  enum class Kind { kMalformedLine, kBadTimestamp };

  ParseError(Kind kind, std::string message, std::size_t line_number = 0)
      : Error(message), kind_(kind), line_number_(line_number) {}

  Kind kind() const { return kind_; }
  std::size_t line_number() const { return line_number_; }

 private:
  Kind kind_;
  std::size_t line_number_;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// Input data is readable but too broken to use (e.g. strict-mode ingest with
// a majority of malformed lines).
class DataQualityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Serialized artifact (model, schema, store, corpus spec) is not readable.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace uba

#endif  // UBA_STATUS_H_
