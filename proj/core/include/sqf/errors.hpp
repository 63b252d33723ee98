#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sqf {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::string field = {});

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

/// A tree or document that parses but violates a structural invariant.
class StructureError : public Error {
 public:
  using Error::Error;
};

/// A precondition of an operation was not met by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

class FragmentationError : public Error {
 public:
  using Error::Error;
};

/// Access recorded with a timestamp older than one already stored.
class ClockError : public Error {
 public:
  using Error::Error;
};

/// Object larger than the whole capacity of the unit it targets.
class OversizeError : public Error {
 public:
  using Error::Error;
};

class PlacementError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Failure while loading a record-oriented file; `record()` is the 0-based
/// index of the offending record.
class LoadError : public Error {
 public:
  LoadError(const std::string& what, std::size_t record);

  std::size_t record() const noexcept { return record_; }

 private:
  std::size_t record_;
};

}  // namespace sqf
