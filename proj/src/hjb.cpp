#include "expstop/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "expstop/parallel.hpp"
#include "expstop/policy.hpp"
#include "expstop/tridiag.hpp"

namespace expstop {

namespace {

std::size_t node_count(double lo, double hi, double h, const char* axis) {
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) {
        throw std::invalid_argument(std::string("grid: ") + axis + " bounds must satisfy min < max");
    }
    const double steps = (hi - lo) / h;
    const double rounded = std::round(steps);
    if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps) || rounded < 2.0) {
        std::ostringstream msg;
        msg << "grid: step " << h << " does not divide the " << axis << " range [" << lo << ", " << hi
            << "] into at least two cells";
        throw std::invalid_argument(msg.str());
    }
    return static_cast<std::size_t>(rounded) + 1;
}

// -L_h as a tridiagonal stencil on the p nodes; interior rows only.
struct Stencil {
    std::vector<double> lower;
    std::vector<double> diag;
    std::vector<double> upper;
    std::size_t upwind_nodes = 0;
};

Stencil build_stencil(const ModelParams& params, const Grid& grid) {
    const std::size_t n = grid.n_p;
    const double h = grid.h;
    const double half_var = 0.5 * params.sigma * params.sigma;
    const double diffusion = half_var / (h * h);
    Stencil s{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double drift = params.theta * (params.pbar - grid.p(i));
        if (std::abs(drift) * h <= 2.0 * half_var) {
            // central differences keep both off-diagonals nonpositive here
            s.lower[i] = -(diffusion - drift / (2.0 * h));
            s.upper[i] = -(diffusion + drift / (2.0 * h));
            s.diag[i] = 2.0 * diffusion;
        } else {
            ++s.upwind_nodes;
            const double upwind = std::abs(drift) / h;
            s.lower[i] = -diffusion - (drift < 0.0 ? upwind : 0.0);
            s.upper[i] = -diffusion - (drift > 0.0 ? upwind : 0.0);
            s.diag[i] = 2.0 * diffusion + upwind;
        }
    }
    return s;
}

enum class BoundaryKind { dirichlet, neumann };

struct Boundary {
    BoundaryKind kind;
    double value = 0.0;
};

struct ColumnOutcome {
    std::vector<double> values;
    bool converged = false;
    int iterations = 0;
    double final_change = 0.0;
    double residual = 0.0;
};

// Frozen-policy iteration for rho V - L_h V = eta f((target - V) M / eta) on one p-column.
ColumnOutcome solve_column(const ModelParams& params, const Stencil& stencil, std::span<const double> target,
                           Boundary low, Boundary high, std::vector<double> values,
                           const SolverOptions& options) {
    const std::size_t n = values.size();
    const double scale = params.cap_m / params.eta;
    const bool second_order = options.neumann == NeumannOrder::second;
    std::vector<double> lower(n), diag(n), upper(n), rhs(n);

    ColumnOutcome out;
    for (int it = 1; it <= options.max_iter; ++it) {
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double y = (target[i] - values[i]) * scale;
            const double mbar = params.cap_m * mean_intensity_fraction(y);
            lower[i] = stencil.lower[i];
            upper[i] = stencil.upper[i];
            diag[i] = params.rho + mbar + stencil.diag[i];
            rhs[i] = params.eta * source_f(y) + mbar * values[i];
        }

        lower[0] = 0.0;
        diag[0] = 1.0;
        if (low.kind == BoundaryKind::dirichlet) {
            upper[0] = 0.0;
            rhs[0] = low.value;
        } else if (second_order) {
            // lagged second-order one-sided condition; exact at the fixed point
            upper[0] = 0.0;
            rhs[0] = (4.0 * values[1] - values[2]) / 3.0;
        } else {
            upper[0] = -1.0;
            rhs[0] = 0.0;
        }

        upper[n - 1] = 0.0;
        diag[n - 1] = 1.0;
        if (high.kind == BoundaryKind::dirichlet) {
            lower[n - 1] = 0.0;
            rhs[n - 1] = high.value;
        } else if (second_order) {
            lower[n - 1] = 0.0;
            rhs[n - 1] = (4.0 * values[n - 2] - values[n - 3]) / 3.0;
        } else {
            lower[n - 1] = -1.0;
            rhs[n - 1] = 0.0;
        }

        auto next = tridiag_solve(lower, diag, upper, rhs);
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (options.damping < 1.0) {
                next[i] = (1.0 - options.damping) * values[i] + options.damping * next[i];
            }
            if (!std::isfinite(next[i])) {
                throw NumericalError("hjb: non-finite iterate");
            }
            change = std::max(change, std::abs(next[i] - values[i]));
        }
        values = std::move(next);
        out.iterations = it;
        out.final_change = change;
        if (change < options.tol) {
            out.converged = true;
            break;
        }
    }

    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double y = (target[i] - values[i]) * scale;
        const double applied =
            stencil.lower[i] * values[i - 1] + stencil.diag[i] * values[i] + stencil.upper[i] * values[i + 1];
        const double r = params.rho * values[i] + applied - params.eta * source_f(y);
        out.residual = std::max(out.residual, std::abs(r));
    }
    out.values = std::move(values);
    return out;
}

void check_inputs(const ModelParams& params, const Grid& grid, const SolverOptions& options) {
    const auto violations = validate_pairs_trading(params);
    if (!violations.empty()) {
        std::string msg = "hjb: invalid parameters:";
        for (const auto& v : violations) msg += " " + v + ";";
        throw std::invalid_argument(msg);
    }
    if (grid.n_p < 4 || grid.n_b < 2) throw std::invalid_argument("hjb: grid too small");
    if (!(options.tol > 0.0) || options.max_iter < 1) throw std::invalid_argument("hjb: bad tolerance");
    if (!(options.damping > 0.0 && options.damping <= 1.0)) {
        throw std::invalid_argument("hjb: damping must lie in (0, 1]");
    }
}

void merge(SolveDiagnostics& into, const ColumnOutcome& column) {
    into.converged = into.converged && column.converged;
    into.iterations = std::max(into.iterations, column.iterations);
    into.final_change = std::max(into.final_change, column.final_change);
    into.residual = std::max(into.residual, column.residual);
}

}  // namespace

Grid Grid::uniform(double p_min, double p_max, double b_min, double b_max, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("grid: step must be positive");
    Grid g;
    g.p_min = p_min;
    g.p_max = p_max;
    g.b_min = b_min;
    g.b_max = b_max;
    g.h = h;
    g.n_p = node_count(p_min, p_max, h, "p");
    g.n_b = node_count(b_min, b_max, h, "b");
    return g;
}

std::vector<double> ValueField::v1_diagonal() const {
    std::vector<double> out(grid.n_p);
    for (std::size_t i = 0; i < grid.n_p; ++i) out[i] = v1_at(i, i);
    return out;
}

namespace {

std::pair<std::size_t, double> locate(double x, double min, double h, std::size_t n) {
    double s = std::clamp((x - min) / h, 0.0, static_cast<double>(n - 1));
    // snap to the node so node queries return stored values exactly
    if (const double r = std::round(s); std::abs(s - r) < 1e-9) s = r;
    const auto k = std::min(static_cast<std::size_t>(s), n - 2);
    return {k, s - static_cast<double>(k)};
}

}  // namespace

double ValueField::v0_interp(double p) const {
    const auto [i, w] = locate(p, grid.p_min, grid.h, grid.n_p);
    return (1.0 - w) * v0[i] + w * v0[i + 1];
}

double ValueField::v1_interp(double p, double b) const {
    const auto [i, wp] = locate(p, grid.p_min, grid.h, grid.n_p);
    const auto [j, wb] = locate(b, grid.b_min, grid.h, grid.n_b);
    const double lo = (1.0 - wb) * v1_at(i, j) + wb * v1_at(i, j + 1);
    const double hi = (1.0 - wb) * v1_at(i + 1, j) + wb * v1_at(i + 1, j + 1);
    return (1.0 - wp) * lo + wp * hi;
}

V1Solution solve_v1(const ModelParams& params, const Grid& grid, const SolverOptions& options) {
    check_inputs(params, grid, options);
    const std::size_t n_p = grid.n_p;
    const std::size_t n_b = grid.n_b;
    const Stencil stencil = build_stencil(params, grid);

    std::vector<ColumnOutcome> columns(n_b);
    parallel_for(
        n_b,
        [&](std::size_t j) {
            const double b = grid.b(j);
            std::vector<double> target(n_p), init(n_p);
            for (std::size_t i = 0; i < n_p; ++i) {
                target[i] = payoff_g(params, grid.p(i), b);
                init[i] = std::max(target[i], 0.0);
            }
            columns[j] = solve_column(params, stencil, target, {BoundaryKind::neumann},
                                      {BoundaryKind::dirichlet, target[n_p - 1]}, std::move(init), options);
        },
        options.threads);

    V1Solution out;
    out.v1.assign(n_p * n_b, 0.0);
    out.diag.converged = true;
    out.diag.upwind_nodes = stencil.upwind_nodes;
    for (std::size_t j = 0; j < n_b; ++j) {
        merge(out.diag, columns[j]);
        for (std::size_t i = 0; i < n_p; ++i) out.v1[i * n_b + j] = columns[j].values[i];
    }
    return out;
}

V0Solution solve_v0(const ModelParams& params, const Grid& grid, std::span<const double> v1_diag,
                    const SolverOptions& options) {
    check_inputs(params, grid, options);
    if (v1_diag.size() != grid.n_p) throw std::invalid_argument("solve_v0: diagonal size mismatch");
    const Stencil stencil = build_stencil(params, grid);
    std::vector<double> init(v1_diag.size());
    std::transform(v1_diag.begin(), v1_diag.end(), init.begin(), [](double v) { return std::max(v, 0.0); });
    auto column = solve_column(params, stencil, v1_diag, {BoundaryKind::dirichlet, v1_diag[0]},
                               {BoundaryKind::neumann}, std::move(init), options);
    V0Solution out;
    out.diag.converged = true;
    out.diag.upwind_nodes = stencil.upwind_nodes;
    merge(out.diag, column);
    out.v0 = std::move(column.values);
    return out;
}

ValueField solve_field(const ModelParams& params, const Grid& grid, const SolverOptions& options) {
    if (!grid.same_axes()) {
        throw std::invalid_argument("solve_field: p and b axes must share the same nodes");
    }
    ValueField field;
    field.grid = grid;
    field.params = params;
    auto v1 = solve_v1(params, grid, options);
    field.v1 = std::move(v1.v1);
    field.v1_diag = v1.diag;
    auto v0 = solve_v0(params, grid, field.v1_diagonal(), options);
    field.v0 = std::move(v0.v0);
    field.v0_diag = v0.diag;
    return field;
}

std::vector<double> advantage_entry(std::span<const double> v0, std::span<const double> v1_diag) {
    if (v0.size() != v1_diag.size()) throw std::invalid_argument("advantage_entry: size mismatch");
    std::vector<double> out(v0.size());
    for (std::size_t i = 0; i < v0.size(); ++i) out[i] = v1_diag[i] - v0[i];
    return out;
}

std::vector<double> advantage_exit(std::span<const double> v1, const Grid& grid, const ModelParams& params) {
    if (v1.size() != grid.n_p * grid.n_b) throw std::invalid_argument("advantage_exit: size mismatch");
    std::vector<double> out(v1.size());
    for (std::size_t i = 0; i < grid.n_p; ++i) {
        for (std::size_t j = 0; j < grid.n_b; ++j) {
            out[i * grid.n_b + j] = payoff_g(params, grid.p(i), grid.b(j)) - v1[i * grid.n_b + j];
        }
    }
    return out;
}

ExitBoundary free_boundary_exit(std::span<const double> delta2, const Grid& grid) {
    if (delta2.size() != grid.n_p * grid.n_b) throw std::invalid_argument("free_boundary_exit: size mismatch");
    ExitBoundary out;
    out.p_star.resize(grid.n_b);
    for (std::size_t j = 0; j < grid.n_b; ++j) {
        int crossings = 0;
        // the last p node carries the Dirichlet value Delta2 = 0 and is not a crossing
        for (std::size_t i = 0; i + 2 < grid.n_p; ++i) {
            const double lo = delta2[i * grid.n_b + j];
            const double hi = delta2[(i + 1) * grid.n_b + j];
            if (lo < 0.0 && hi >= 0.0) {
                if (crossings++ == 0) out.p_star[j] = grid.p(i) + grid.h * (-lo) / (hi - lo);
            }
        }
        out.multiple_crossings = out.multiple_crossings || crossings > 1;
    }
    return out;
}

EntryBoundary free_boundary_entry(std::span<const double> delta1, const Grid& grid) {
    if (delta1.size() != grid.n_p) throw std::invalid_argument("free_boundary_entry: size mismatch");
    EntryBoundary out;
    int crossings = 0;
    // node 0 carries the Dirichlet value Delta1 = 0
    for (std::size_t i = 1; i + 1 < grid.n_p; ++i) {
        const double lo = delta1[i];
        const double hi = delta1[i + 1];
        if (lo > 0.0 && hi <= 0.0) {
            if (crossings++ == 0) out.p_dagger = grid.p(i) + grid.h * lo / (lo - hi);
        }
    }
    out.multiple_crossings = crossings > 1;
    return out;
}

std::pair<std::size_t, std::size_t> window_indices(double min, double h, std::size_t n, double lo, double hi) {
    const double first = std::ceil((lo - min) / h - 1e-9);
    const double last = std::floor((hi - min) / h + 1e-9);
    const auto clamp_index = [&](double k) {
        return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(n - 1)));
    };
    return {clamp_index(first), clamp_index(last)};
}

}  // namespace expstop
