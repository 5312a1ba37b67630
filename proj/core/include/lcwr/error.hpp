#pragma once

#include <stdexcept>
#include <string>

namespace lcwr {

// Root of everything the library throws on bad input or bad data.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (non-positive sigma, empty input,
// malformed configuration).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// The data itself is unusable: missing gamma entries, inconsistent
// baselines, unparseable files.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace lcwr
