#pragma once

#include <stdexcept>
#include <string>

namespace rdest {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Caller-supplied value outside its documented domain (QP, ratios, sizes).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during optimisation.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Missing or inconsistent dataset records.
class DataIntegrityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed ground-truth file handed to the import path.
class ImportError : public Error {
 public:
  using Error::Error;
};

enum class LoadErrorKind { BadMagic, VersionMismatch, KindMismatch, ShapeMismatch, Truncated, Malformed };

class LoadError : public Error {
 public:
  LoadError(LoadErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  LoadErrorKind kind() const noexcept { return kind_; }

 private:
  LoadErrorKind kind_;
};

}  // namespace rdest
