#pragma once

#include <stdexcept>
#include <string>

namespace coarsen {

/** @brief Base class of every error thrown by the library. */
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user input: bad weights, bad grid, bad options.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the region where a map is defined (|z| >= 1 for phi, radius of Psi, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed to reach its tolerance.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Convolution support or a transported density would leave the allocated grid.
class GridOverflow : public NumericalError {
public:
    using NumericalError::NumericalError;
};

namespace detail {
inline void require(bool ok, const std::string& what)
{
    if (!ok) throw ConfigError(what);
}
} // namespace detail

} // namespace coarsen
