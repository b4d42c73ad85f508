#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace consprompt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (shape, count, range).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A token id or word is not part of the backend vocabulary.
class VocabularyError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or unknown option.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or insufficient input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A template pattern failed validation. `position` is a byte offset into
/// the pattern source.
class TemplateSyntaxError : public Error {
 public:
  TemplateSyntaxError(const std::string& what, std::size_t position)
      : Error(what + " (at position " + std::to_string(position) + ")"),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// A line-oriented input file could not be parsed. `line` is 1-based.
class LoadError : public DataError {
 public:
  LoadError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Not enough examples of `label` to draw the requested split.
class CapacityError : public DataError {
 public:
  CapacityError(const std::string& label, const std::string& what)
      : DataError(what), label_(label) {}

  const std::string& label() const noexcept { return label_; }

 private:
  std::string label_;
};

/// A loss or gradient became non-finite.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace consprompt
