#ifndef FLUCAST_ERRORS_HPP
#define FLUCAST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace flucast {

/// Invalid user-supplied configuration (bad flag, bad config file).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CSV parse failures, empty panels).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Failures during model fitting or prediction (shape mismatch, divergence).
struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace flucast

#endif
