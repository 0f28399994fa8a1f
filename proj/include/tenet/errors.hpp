#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tenet {

// Invalid arguments are reported with std::invalid_argument and domain
// violations (negative spectra, values outside [0, 1]) with std::domain_error.
// The two classes below cover failure modes the standard ones do not name.

/// Thrown when an input exceeds the desk-scale bounds of an operation.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Thrown when a binary tensor file cannot be decoded.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte offset " + std::to_string(offset)),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace tenet
