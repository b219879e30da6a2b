#pragma once

#include <stdexcept>
#include <string>

namespace sqz {

// Error taxonomy shared by the library and the CLI. The CLI maps each class
// to a distinct exit code (see tools/).

// Wrong call: mismatched series lengths, unknown tags, empty inputs.
struct UsageError : std::invalid_argument {
    explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};

// Parameter-domain violation: negative rates, eta outside [0,1], ...
struct ParamError : std::invalid_argument {
    explicit ParamError(const std::string& what) : std::invalid_argument(what) {}
};

// Invalid run configuration (step size guards, missing files named in config).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: non-convergent fit, diverging reconstruction, bad calibration.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sqz
