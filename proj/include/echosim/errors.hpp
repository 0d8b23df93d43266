#pragma once

#include <stdexcept>
#include <string>

namespace echosim {

// The CLI maps these onto process exit codes:
//   ConfigError -> 2, DataError -> 3, InvariantError -> 4.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

// .svol decoding failures, one type per failure class.
class MalformedHeaderError : public DataError {
 public:
  using DataError::DataError;
};

class PayloadMismatchError : public DataError {
 public:
  using DataError::DataError;
};

class UnsupportedElementError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace echosim
