#pragma once

#include <stdexcept>
#include <string>

namespace phonodyn {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameter value, unknown key or preset, malformed expression.
class ParamError : public Error {
public:
    using Error::Error;
};

/// Malformed input file; carries the 1-based line number (0 when unknown).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Step-size underflow in the adaptive integrator; tau is the dimensionless
/// time (Omega * t) at which the step collapsed.
class IntegrationError : public Error {
public:
    IntegrationError(const std::string& what, double tau)
        : Error(what + " at tau=" + std::to_string(tau)), tau_(tau) {}
    double tau() const noexcept { return tau_; }

private:
    double tau_;
};

/// Operation requires a stable steady state.
class UnstableBranchError : public Error {
public:
    using Error::Error;
};

/// The slowest mode of the linearization is not phonon-like.
class AttributionError : public Error {
public:
    using Error::Error;
};

/// Ring-down produced too few envelope maxima for a fit.
class OverdampedError : public Error {
public:
    using Error::Error;
};

}  // namespace phonodyn
