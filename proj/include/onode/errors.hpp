#pragma once

#include <stdexcept>
#include <string>

namespace onode {

// Config/flag/argument validation failures. CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Incompatible vector/port dimensions.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input files (IDX, checkpoint). CLI exit code 3.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Missing/unreadable/unwritable paths. CLI exit code 3.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required. CLI exit code 4.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operation invoked without the state it needs (e.g. gradients from a
// solve record that saved nothing).
struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace onode
