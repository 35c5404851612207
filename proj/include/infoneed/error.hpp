#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace infoneed {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. `line()` is 1-based; 0 when not line-oriented.
class ParseError : public Error {
  public:
    ParseError(std::string file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what),
          file_(std::move(file)), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

  private:
    std::string file_;
    std::size_t line_;
};

/// Input violates a documented invariant (duplicate ids, bad ratios, ...).
class ValidationError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

/// Failure talking to an inference provider.
class ProviderError : public Error {
  public:
    ProviderError(const std::string& what, bool retryable)
        : Error(what), retryable_(retryable) {}

    bool retryable() const noexcept { return retryable_; }

  private:
    bool retryable_;
};

}  // namespace infoneed
