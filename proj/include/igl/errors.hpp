#pragma once

#include <stdexcept>
#include <string>

namespace igl {

/// Invalid or inconsistent user-supplied configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Environment specification violates a structural contract
/// (kernel rows, layer structure, feedback consistency, identifiability).
struct EnvSpecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A numerical routine failed to converge or hit an inconsistency.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Filesystem / stream failure, annotated with the offending path.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace igl
