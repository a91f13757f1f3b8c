#pragma once

#include <stdexcept>
#include <string>

namespace entrokeys {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument, violated precondition, or mismatched dimensions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Failure to open, read, or write a file.
class IoError : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind {
  kWrongMagic,
  kMalformedHeader,
  kUnsupportedMaxval,
  kTruncatedPayload,
  kMalformedRecord,
};

inline const char* to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::kWrongMagic: return "wrong magic";
    case ParseErrorKind::kMalformedHeader: return "malformed header";
    case ParseErrorKind::kUnsupportedMaxval: return "unsupported maxval";
    case ParseErrorKind::kTruncatedPayload: return "truncated payload";
    case ParseErrorKind::kMalformedRecord: return "malformed record";
  }
  return "parse error";
}

/// A file was readable but its contents do not follow the expected format.
class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what)
      : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

}  // namespace entrokeys
