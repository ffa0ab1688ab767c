#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace expstop {

/// Raised when a linear solve or fixed-point iteration cannot proceed.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thomas algorithm for lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i].
/// lower[0] and upper[n-1] are ignored. Requires weak diagonal dominance in every
/// row and strict dominance in at least one; throws NumericalError otherwise or on
/// a vanishing pivot.
std::vector<double> tridiag_solve(std::span<const double> lower, std::span<const double> diag,
                                  std::span<const double> upper, std::span<const double> rhs);

}  // namespace expstop
