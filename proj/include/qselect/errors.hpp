// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace qselect {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input data (dataset files, JSONL interchange, cache records) is malformed.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Run configuration is missing or inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A model response contained no usable question text.
class EmptyGeneration : public Error {
 public:
  using Error::Error;
};

/// An internal invariant did not hold; always a bug.
class InvariantBreach : public Error {
 public:
  using Error::Error;
};

}  // namespace qselect
