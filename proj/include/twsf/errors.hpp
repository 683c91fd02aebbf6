#pragma once

#include <stdexcept>
#include <string>

namespace twsf {

// Shape/dimension mismatches between arrays.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated call contracts: bad axis, invalid configuration, insufficient data.
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input files; messages carry row/column locations.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric failure states: NaN/Inf values, eigensolver non-convergence.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace twsf
