#pragma once

#include <stdexcept>
#include <string>

namespace tumorseg {

// Root of the library's exception hierarchy.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad input data or files on disk. The CLI maps these to exit code 2.
struct DataError : Error {
  using Error::Error;
};

// Invalid configuration or command usage. The CLI maps these to exit code 1.
struct ConfigError : Error {
  using Error::Error;
};

struct MissingRootError : DataError {
  explicit MissingRootError(const std::string& path)
      : DataError("dataset root not found: " + path) {}
};

struct EmptyDatasetError : DataError {
  explicit EmptyDatasetError(const std::string& path)
      : DataError("no cases found under: " + path) {}
};

struct ModalityMissingError : DataError {
  ModalityMissingError(const std::string& case_id, const std::string& modality)
      : DataError("case " + case_id + " has no " + modality + " volume") {}
};

struct SegmentationMissingError : DataError {
  explicit SegmentationMissingError(const std::string& case_id)
      : DataError("case " + case_id + " has no segmentation") {}
};

struct CorruptFileError : DataError {
  using DataError::DataError;
};

struct InvalidLabelError : DataError {
  explicit InvalidLabelError(int label_value)
      : DataError("invalid segmentation label " + std::to_string(label_value) +
                  " (expected one of 0, 1, 2, 4)"),
        label(label_value) {}
  int label;
};

struct IoError : DataError {
  using DataError::DataError;
};

struct WindowOutOfBoundsError : DataError {
  WindowOutOfBoundsError(int start, int length, int depth)
      : DataError("slice window [" + std::to_string(start) + ", " +
                  std::to_string(start + length) + ") does not fit volume depth " +
                  std::to_string(depth)) {}
};

struct InvalidTargetError : ConfigError {
  using ConfigError::ConfigError;
};

struct ClassOutOfRangeError : DataError {
  ClassOutOfRangeError(int value, int num_classes)
      : DataError("class index " + std::to_string(value) + " out of range for " +
                  std::to_string(num_classes) + " classes") {}
};

struct BadRatiosError : ConfigError {
  using ConfigError::ConfigError;
};

struct TooFewCasesError : DataError {
  explicit TooFewCasesError(std::size_t n)
      : DataError("need at least 3 cases to split, got " + std::to_string(n)) {}
};

struct ShapeMismatchError : Error {
  using Error::Error;
};

struct ConfigInvalidError : ConfigError {
  using ConfigError::ConfigError;
};

struct UnknownMetricError : ConfigError {
  explicit UnknownMetricError(const std::string& name)
      : ConfigError("unknown metric: " + name) {}
};

struct InconsistentColumnsError : DataError {
  using DataError::DataError;
};

}  // namespace tumorseg
