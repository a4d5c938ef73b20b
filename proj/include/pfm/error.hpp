#pragma once

#include <stdexcept>
#include <string>

namespace pfm {

// All recoverable failures in the library surface as pfm::Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Error raised while decoding a record-oriented input; carries the index of
// the offending record.
class ParseError : public Error {
 public:
  ParseError(std::size_t record_index, const std::string& what)
      : Error("record " + std::to_string(record_index) + ": " + what),
        record_index_(record_index) {}

  std::size_t record_index() const { return record_index_; }

 private:
  std::size_t record_index_;
};

}  // namespace pfm
