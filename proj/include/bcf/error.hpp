#pragma once

#include <stdexcept>
#include <string>

namespace bcf {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside its mathematical domain (e.g. a partition id > 31).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported binary data (block words, DDS, weight blobs).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent sizes, presets or configuration documents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Export refused (research profile, non-finite weights, unsupported layout).
class ExportError : public Error {
 public:
  using Error::Error;
};

/// Package failed validation on import.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss during optimization.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace bcf
