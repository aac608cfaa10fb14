#pragma once

#include <stdexcept>
#include <string>

namespace dkm {

// Error hierarchy. The three branches map onto the CLI exit codes:
// ConfigError -> 2, DataError -> 3, NumericError -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

// numeric failures
struct NotPositiveDefinite : NumericError {
  using NumericError::NumericError;
};
struct NonFinite : NumericError {
  using NumericError::NumericError;
};
struct NonFiniteLoss : NumericError {
  using NumericError::NumericError;
};
struct DegenerateCovariance : NumericError {
  using NumericError::NumericError;
};
struct ZeroVariance : NumericError {
  using NumericError::NumericError;
};

// contract violations
struct BadParam : ConfigError {
  using ConfigError::ConfigError;
};
struct ShapeMismatch : ConfigError {
  using ConfigError::ConfigError;
};
struct IndexOutOfRange : ConfigError {
  using ConfigError::ConfigError;
};
struct TooFewSamples : ConfigError {
  using ConfigError::ConfigError;
};
struct EmptyTruth : ConfigError {
  using ConfigError::ConfigError;
};
struct StaleCache : ConfigError {
  using ConfigError::ConfigError;
};

// file / serialization failures
struct CsvParseError : DataError {
  using DataError::DataError;
};
struct RaggedRows : DataError {
  using DataError::DataError;
};
struct NonFiniteEntry : DataError {
  using DataError::DataError;
};
struct FormatVersionMismatch : DataError {
  using DataError::DataError;
};
struct CorruptFile : DataError {
  using DataError::DataError;
};

}  // namespace dkm
