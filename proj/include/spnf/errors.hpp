#pragma once

#include <stdexcept>
#include <string>

namespace spnf {

// Bad user input: malformed files, inconsistent dimensions, invalid flags.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable / unwritable files.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite losses and other mid-run failures.
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace spnf
