#pragma once

#include <stdexcept>
#include <string>

namespace situ {

/// Caller supplied something the contract rejects (maps to CLI exit code 2).
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A keyframe or execution referenced an object that is not in the layout.
struct MissingObject : InvalidInput {
  using InvalidInput::InvalidInput;
};

/// Model invariants broke (maps to CLI exit code 3).
struct ConsistencyError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Malformed or incompatible file. The message carries the location.
struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace situ
