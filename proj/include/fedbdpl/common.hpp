#pragma once

#include <stdexcept>
#include <string>

namespace fedbdpl {

// Shape mismatches between matrices, prompts and vocabularies.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid configuration values (K_star > K, I < 2, empty dataset, ...).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Enumeration guard exceeded (N^n too large for exhaustive oracles).
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Oracle query failed (transport failure after retries, malformed reply).
struct QueryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A theory bound was asked for outside its stated precondition.
struct BoundInapplicableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ExecPolicy { Serial, Parallel };

}  // namespace fedbdpl
