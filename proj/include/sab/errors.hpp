#pragma once

#include <stdexcept>
#include <string>

namespace sab {

// Malformed or inconsistent input data (bad file, schema violation, missing column).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Statistics that cannot be computed from the data (zero variance with nonzero effect, ...).
class DegenerateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside its documented domain.
class RangeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

} // namespace sab
