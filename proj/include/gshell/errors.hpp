#pragma once

#include <stdexcept>
#include <string>

namespace gshell {

// Error taxonomy mirrors the CLI exit codes: invalid input -> 2,
// numeric failure -> 3, format error -> 4.

struct InvalidInput : std::runtime_error {
    explicit InvalidInput(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericFailure : std::runtime_error {
    explicit NumericFailure(const std::string& msg) : std::runtime_error(msg) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace gshell
