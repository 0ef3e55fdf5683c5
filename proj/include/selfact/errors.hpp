#pragma once

#include <stdexcept>
#include <string>

namespace selfact {

// Malformed or unusable input data (CSV parse failures, missing files,
// architecture mismatches on load). Mapped to exit code 2 by the CLI.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A pipeline stage could not proceed (all-noise clustering, accumulation
// never completed, empty labeled set). Mapped to exit code 3 by the CLI.
struct PipelineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace selfact
