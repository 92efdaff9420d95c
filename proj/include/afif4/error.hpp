#pragma once

#include <stdexcept>
#include <string>

namespace afif4 {

// All recoverable failures (bad files, contract violations, solver
// non-convergence) surface as this exception type.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace afif4
