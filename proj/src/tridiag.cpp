#include "expstop/tridiag.hpp"

#include <cmath>
#include <string>

namespace expstop {

std::vector<double> tridiag_solve(std::span<const double> lower, std::span<const double> diag,
                                  std::span<const double> upper, std::span<const double> rhs) {
    const std::size_t n = diag.size();
    if (n == 0 || lower.size() != n || upper.size() != n || rhs.size() != n) {
        throw std::invalid_argument("tridiag_solve: size mismatch");
    }

    bool strict_somewhere = false;
    for (std::size_t i = 0; i < n; ++i) {
        const double off = (i > 0 ? std::abs(lower[i]) : 0.0) + (i + 1 < n ? std::abs(upper[i]) : 0.0);
        const double d = std::abs(diag[i]);
        if (d < off) {
            throw NumericalError("tridiag_solve: diagonal dominance lost at row " + std::to_string(i));
        }
        strict_somewhere = strict_somewhere || d > off;
    }
    if (!strict_somewhere) {
        throw NumericalError("tridiag_solve: no strictly dominant row");
    }

    std::vector<double> c_star(n, 0.0);
    std::vector<double> x(n, 0.0);
    double pivot = diag[0];
    if (pivot == 0.0) throw NumericalError("tridiag_solve: zero pivot at row 0");
    c_star[0] = n > 1 ? upper[0] / pivot : 0.0;
    x[0] = rhs[0] / pivot;
    for (std::size_t i = 1; i < n; ++i) {
        pivot = diag[i] - lower[i] * c_star[i - 1];
        if (pivot == 0.0 || !std::isfinite(pivot)) {
            throw NumericalError("tridiag_solve: zero pivot at row " + std::to_string(i));
        }
        c_star[i] = i + 1 < n ? upper[i] / pivot : 0.0;
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / pivot;
    }
    for (std::size_t i = n - 1; i-- > 0;) {
        x[i] -= c_star[i] * x[i + 1];
    }
    return x;
}

}  // namespace expstop
