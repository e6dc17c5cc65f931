#pragma once

#include <stdexcept>
#include <string>

namespace drmcvar {

// Base for every error the library raises on bad input or failed computation.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent market data (CSV/JSON panels, windows).
class DataError : public Error {
public:
    using Error::Error;
};

// A precondition on arguments or configuration was violated.
class ValidationError : public Error {
public:
    using Error::Error;
};

// The conic solver did not reach an optimal solution where one was required.
class SolverError : public Error {
public:
    using Error::Error;
};

} // namespace drmcvar
