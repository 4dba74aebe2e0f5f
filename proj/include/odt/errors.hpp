#pragma once

#include <stdexcept>
#include <string>

namespace odt {

/// Malformed or inconsistent input data (files, dims, configuration).
class input_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The solver could not continue, e.g. the objective became non-finite.
class solver_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace odt
