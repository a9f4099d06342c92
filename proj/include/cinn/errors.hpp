// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cinn {

// Base of every error raised by the library. Subclasses map onto the CLI exit
// codes (see tools/cinn_main.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Raised whenever a NaN or Inf shows up in an evaluated value.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class LayoutError : public Error {
 public:
  using Error::Error;
};

class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

class UnsupportedMetricError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  enum class Kind { kNotFound, kVersionMismatch, kCorruptHeader, kShapeMismatch };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace cinn
