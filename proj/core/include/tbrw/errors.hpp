#pragma once

#include <stdexcept>
#include <string>

namespace tbrw {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-domain arguments (bad config values, invalid parameters).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Structural problems with a tree: cycles, disconnection, duplicate edges,
/// references to dead bundles or out-of-range ids.
class InvalidTreeError : public Error {
 public:
  using Error::Error;
};

/// An operation was asked to run in a state it does not support
/// (e.g. step-level observer attached to a distribution-transport run).
class StateError : public Error {
 public:
  using Error::Error;
};

/// A configured resource cap was exceeded (state count, step budget).
class BudgetExceededError : public Error {
 public:
  using Error::Error;
};

}  // namespace tbrw
