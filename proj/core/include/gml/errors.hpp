#pragma once

#include <stdexcept>
#include <string>

namespace gml {

// Malformed or inconsistent input data (bundles, reports). The CLI maps it to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid parameters or configuration. The CLI maps it to exit code 1.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace gml
