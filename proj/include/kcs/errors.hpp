#pragma once

#include <stdexcept>
#include <string>

namespace kcs {

// Error categories map onto process exit codes in the CLI driver:
// config = 2, resource = 3, numeric = 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ResourceError : std::runtime_error {
    explicit ResourceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace kcs
