#pragma once

#include <stdexcept>
#include <string>

namespace nuer {

// Error categories map to distinct CLI exit codes.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or version-mismatched artifact files (datasets, vocabularies,
// checkpoints, reports).
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace nuer
