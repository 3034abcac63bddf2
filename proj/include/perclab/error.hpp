#pragma once

#include <stdexcept>
#include <string>

namespace perclab {

/// Invalid input to an operation (bad parameters, malformed text, violated precondition).
class SpecError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A finite resource ran out: memory budget, enumeration size, corrupted or unwritable files.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw SpecError(msg);
}

} // namespace perclab
