#pragma once

/**
 * @file hjb.hpp
 * @brief Finite-difference solver for the coupled stationary HJB system
 *
 *   rho V1 - L V1 = eta f((G - V1) M / eta)          on (p, b)
 *   rho V0 - L V0 = eta f((V1(p,p) - V0) M / eta)    on p
 *
 * with L the OU generator and f(y) = ln((e^y - 1)/y). Each b-column of V1 and
 * the single V0 column are solved by a frozen-policy linearization: since
 * d/dV [eta f((T - V) M / eta)] = -mbar(V), iterate
 *
 *   (rho + mbar^k) V^{k+1} - L_h V^{k+1} = eta f(y^k) + mbar^k V^k
 *
 * until the sup-norm change drops below the tolerance.
 *
 * Boundaries: V1_p(p_min, b) = 0, V1(p_max, b) = G(p_max, b),
 *             V0(p_min) = V1(p_min, p_min), V0_p(p_max) = 0.
 */

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "expstop/model.hpp"

namespace expstop {

/// Uniform tensor grid. The coupled system needs identical p and b node sets.
struct Grid {
    double p_min = -4.0;
    double p_max = 4.0;
    double b_min = -4.0;
    double b_max = 4.0;
    double h = 0.05;
    std::size_t n_p = 161;
    std::size_t n_b = 161;

    /// Builds the grid and validates it; throws std::invalid_argument on bad bounds or step.
    static Grid uniform(double p_min, double p_max, double b_min, double b_max, double h);

    double p(std::size_t i) const { return p_min + static_cast<double>(i) * h; }
    double b(std::size_t j) const { return b_min + static_cast<double>(j) * h; }
    bool same_axes() const { return p_min == b_min && n_p == n_b; }
};

enum class NeumannOrder { first = 1, second = 2 };

struct SolverOptions {
    double tol = 1e-6;
    int max_iter = 1000;
    double damping = 1.0;  ///< relaxation weight on the new iterate, in (0, 1]
    NeumannOrder neumann = NeumannOrder::first;
    int threads = 0;  ///< 0: use worker_count()
};

struct SolveDiagnostics {
    bool converged = false;
    int iterations = 0;           ///< max over columns
    double final_change = 0.0;    ///< max over columns of the last sup-norm change
    double residual = 0.0;        ///< sup-norm of the nonlinear residual on interior nodes
    std::size_t upwind_nodes = 0; ///< nodes where the drift switched to one-sided differences
};

struct ValueField {
    Grid grid;
    ModelParams params;
    std::vector<double> v0;  ///< n_p
    std::vector<double> v1;  ///< n_p x n_b, row-major in p: v1[i * n_b + j]
    SolveDiagnostics v1_diag;
    SolveDiagnostics v0_diag;

    double v1_at(std::size_t i, std::size_t j) const { return v1[i * grid.n_b + j]; }
    /// V1(p_i, p_i) for every p node.
    std::vector<double> v1_diagonal() const;
    /// Linear interpolation, clamped to the grid.
    double v0_interp(double p) const;
    /// Bilinear interpolation, clamped to the grid.
    double v1_interp(double p, double b) const;
    bool converged() const { return v0_diag.converged && v1_diag.converged; }
};

struct V1Solution {
    std::vector<double> v1;
    SolveDiagnostics diag;
};

struct V0Solution {
    std::vector<double> v0;
    SolveDiagnostics diag;
};

/// Requires gamma = iota = 1. Columns are solved independently (in parallel when threads > 1).
V1Solution solve_v1(const ModelParams& params, const Grid& grid, const SolverOptions& options = {});

/// `v1_diag` is V1(p, p) on the p nodes from a converged solve_v1.
V0Solution solve_v0(const ModelParams& params, const Grid& grid, std::span<const double> v1_diag,
                    const SolverOptions& options = {});

/// solve_v1 followed by solve_v0.
ValueField solve_field(const ModelParams& params, const Grid& grid, const SolverOptions& options = {});

/// Delta1(p) = V1(p, p) - V0(p).
std::vector<double> advantage_entry(std::span<const double> v0, std::span<const double> v1_diag);

/// Delta2(p, b) = G(p, b) - V1(p, b), same layout as ValueField::v1.
std::vector<double> advantage_exit(std::span<const double> v1, const Grid& grid, const ModelParams& params);

struct ExitBoundary {
    std::vector<std::optional<double>> p_star;  ///< per b node; empty when Delta2 has no - to + crossing
    bool multiple_crossings = false;
};

/// Per b, the first - to + crossing of Delta2 in increasing p (Dirichlet node excluded).
ExitBoundary free_boundary_exit(std::span<const double> delta2, const Grid& grid);

struct EntryBoundary {
    std::optional<double> p_dagger;
    bool multiple_crossings = false;
};

/// First + to - crossing of Delta1 in increasing p (Dirichlet node excluded).
EntryBoundary free_boundary_entry(std::span<const double> delta1, const Grid& grid);

/// Index range [first, last] of the nodes min + k h that fall inside [lo, hi] (1e-9 slack).
std::pair<std::size_t, std::size_t> window_indices(double min, double h, std::size_t n, double lo,
                                                   double hi);

}  // namespace expstop
