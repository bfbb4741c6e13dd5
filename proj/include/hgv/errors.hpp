#pragma once

#include <stdexcept>
#include <string>

namespace hgv {

// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or arity mismatch between operands.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Value outside an operation's mathematical domain (log of 0, non-finite input, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Misuse of a procedure: single-class metric input, non-deterministic gradcheck target, ...
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Malformed text input (JSONL lines, checkpoints).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates the expected schema or dimensions.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Unknown identifier (record id, parameter name).
class LookupError : public Error {
 public:
  using Error::Error;
};

// Checkpoint written by an incompatible format version.
class VersionError : public SchemaError {
 public:
  using SchemaError::SchemaError;
};

// Invalid configuration value or key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hgv
