#pragma once

#include <stdexcept>
#include <string>

namespace adis {

/// Bad shapes, out-of-range parameters, malformed input.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown that the caller may be able to work around
/// (degenerate spectra, rank deficiency, non-stationary AR fits).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateSpectrumError : public NumericalError {
public:
    DegenerateSpectrumError(const std::string& what, int index)
        : NumericalError(what), index_(index) {}
    int index() const noexcept { return index_; }

private:
    int index_;
};

class NonStationaryError : public NumericalError {
public:
    NonStationaryError(const std::string& what, int index)
        : NumericalError(what), index_(index) {}
    int index() const noexcept { return index_; }

private:
    int index_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace adis
