#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace freebound {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parameter or input outside the admissible domain.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Two fields (or a field and a boundary) live on different grids.
class GridMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// The requested object does not exist because the cost has b1 = 0
/// (the stopping value vanishes identically and the free boundary is
/// undefined).
class DegenerateModeError : public Error {
public:
    using Error::Error;
};

/// An iterative solver hit its iteration cap.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::size_t iterations, double last_change)
        : Error(what + " (iterations=" + std::to_string(iterations)
                + ", last change=" + std::to_string(last_change) + ")"),
          iterations_(iterations), last_change_(last_change) {}

    std::size_t iterations() const noexcept { return iterations_; }
    double last_change() const noexcept { return last_change_; }

private:
    std::size_t iterations_;
    double last_change_;
};

}  // namespace freebound
