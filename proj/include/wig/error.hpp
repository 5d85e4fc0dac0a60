#ifndef WIG_ERROR_HPP
#define WIG_ERROR_HPP

#include <stdexcept>
#include <string>

namespace wig {

// Bad argument values, shape mismatches, violated invariants.
struct ValueError : std::runtime_error {
    explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable, unwritable or malformed files.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace wig

#endif
