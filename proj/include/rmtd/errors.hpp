#pragma once

#include <stdexcept>
#include <string>

namespace rmtd {

// Thrown when a covariance matrix is singular or indefinite where positive
// definiteness is required (nonpositive eigenvalue, failed factorization).
class SingularMatrixError : public std::runtime_error {
public:
    explicit SingularMatrixError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when parameters fall outside the supported asymptotic regime,
// e.g. aspect ratio c outside (0,1) in the detector closed forms.
class UnsupportedRegimeError : public std::invalid_argument {
public:
    explicit UnsupportedRegimeError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace rmtd
