#pragma once

#include <stdexcept>
#include <string>

namespace ofr {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Channel counts, kernel shapes, config keys or weight layouts that do not fit.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Spatial dimensions of two operands disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A resize or window would produce (or needs) a dimension the input cannot give.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Scalar parameter outside its domain, e.g. t outside (0,1).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Frame lists or per-index outputs with the wrong length or alignment.
class SequenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary or text file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Files or directories that cannot be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// The analytic estimator was asked about frames it has no motion metadata for.
class OracleUnavailable : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. backprop through a graph that did not record.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace ofr
