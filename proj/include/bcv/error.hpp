#pragma once

#include <stdexcept>
#include <string>

namespace bcv {

/// Raised for every recoverable failure in the library: malformed input,
/// invalid configuration, or a contract violation detected at run time.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bcv
