#pragma once

#include <stdexcept>
#include <string>

namespace caloric {

/// Bad input: wrong shape, out-of-range parameter, empty data where data is required.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a value (infeasible LP, zero mass, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

}  // namespace caloric
