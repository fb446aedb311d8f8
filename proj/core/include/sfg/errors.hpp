#pragma once

#include <stdexcept>
#include <string>

namespace sfg {

/// Malformed input data: bad files, mismatched shapes, empty masks.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation produced non-finite values or failed to converge.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace sfg
