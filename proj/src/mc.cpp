#include "expstop/mc.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "expstop/parallel.hpp"
#include "expstop/policy.hpp"

namespace expstop {

StageRate gibbs_rate(double advantage, const ModelParams& params) {
    return {mean_intensity(advantage, params.eta, params.cap_m),
            entropy_cost(advantage, params.eta, params.cap_m)};
}

StageRate FieldGibbsPolicy::entry(double p) const {
    return gibbs_rate(field_.v1_interp(p, p) - field_.v0_interp(p), field_.params);
}

StageRate FieldGibbsPolicy::exit(double p, double b) const {
    return gibbs_rate(payoff_g(field_.params, p, b) - field_.v1_interp(p, b), field_.params);
}

namespace {

struct PathResult {
    double instantaneous = 0.0;  // reward minus exploration cost
    double reward = 0.0;
    double stopping = 0.0;
    double penalty = 0.0;
    double max_abs_g = 0.0;
};

std::size_t step_count(const RolloutConfig& config) {
    if (!(config.dt > 0.0) || !(config.t_max > 0.0)) {
        throw std::invalid_argument("rollout: dt and t_max must be positive");
    }
    return static_cast<std::size_t>(std::llround(config.t_max / config.dt));
}

template <bool Record>
PathResult run_path(const IntensityPolicy& policy, const ModelParams& params, const OuTransition& ou,
                    double p0, const RolloutConfig& config, const SeedPack& seeds, Trajectory* trajectory) {
    auto signal = seeds.engine(Stream::signal);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double entry_seed = seeds.entry_exponential();
    const double exit_seed = seeds.exit_exponential();
    const std::size_t steps = step_count(config);
    const double dt = config.dt;
    const double step_discount = std::exp(-params.rho * dt);

    PathResult out;
    double p = p0;
    double b = 0.0;
    double discount = 1.0;
    double entry_clock = 0.0;
    double exit_clock = 0.0;
    Regime j = Regime::idle;
    if constexpr (Record) {
        trajectory->dt = dt;
        trajectory->states.push_back({p, j, b});
    }

    for (std::size_t l = 0; l < steps; ++l) {
        const bool holding = j == Regime::holding;
        const StageRate rate = holding ? policy.exit(p, b) : policy.entry(p);
        const double g = payoff_g(params, p, holding ? b : p);
        out.max_abs_g = std::max(out.max_abs_g, std::abs(g));

        double weight = dt;        // discounted time spent in the stage during the step
        double rate_weight = rate.intensity * dt;
        if (config.rule == RewardRule::exact_step) {
            if (std::isfinite(rate.intensity)) {
                const double total = params.rho + rate.intensity;
                weight = -std::expm1(-total * dt) / total;
                rate_weight = rate.intensity * weight;
            } else {
                weight = 0.0;
                rate_weight = 1.0;
            }
        }
        out.penalty += discount * weight * rate.entropy_cost;
        if (holding) out.reward += discount * rate_weight * g;

        const double p_next = ou(p, normal(signal));
        const double t_next = static_cast<double>(l + 1) * dt;
        if (holding) {
            exit_clock += rate.intensity * dt;
            if (exit_clock >= exit_seed) {
                j = Regime::done;
                out.stopping = discount * step_discount * payoff_g(params, p_next, b);
                if constexpr (Record) trajectory->exit_time = t_next;
            }
        } else {
            entry_clock += rate.intensity * dt;
            if (entry_clock >= entry_seed) {
                j = Regime::holding;
                b = p_next;
                if constexpr (Record) trajectory->entry_time = t_next;
            }
        }
        p = p_next;
        discount *= step_discount;
        if constexpr (Record) trajectory->states.push_back({p, j, b});
        if (j == Regime::done) break;
    }
    out.instantaneous = out.reward - out.penalty;
    if constexpr (Record) {
        trajectory->discounted_reward = out.instantaneous;
        trajectory->stopping_payoff = out.stopping;
        trajectory->entropy_penalty_accum = out.penalty;
        trajectory->max_abs_payoff = out.max_abs_g;
        trajectory->truncated = j != Regime::done;
    }
    return out;
}

std::vector<PathResult> run_paths(const IntensityPolicy& policy, const ModelParams& params, double p0,
                                  std::size_t n_paths, const RolloutConfig& config, std::uint64_t master_seed) {
    if (n_paths < 2) throw std::invalid_argument("estimators need at least two paths");
    step_count(config);
    const OuTransition ou(params, config.dt);
    std::vector<PathResult> results(n_paths);
    parallel_for(
        n_paths,
        [&](std::size_t i) {
            results[i] = run_path<false>(policy, params, ou, p0, config, SeedPack{master_seed, i}, nullptr);
        },
        config.threads);
    return results;
}

template <class F>
Estimate summarize(const std::vector<PathResult>& results, F&& pick, const ModelParams& params,
                   const RolloutConfig& config) {
    CompensatedSum sum;
    double max_g = 0.0;
    for (const auto& r : results) {
        sum.add(pick(r));
        max_g = std::max(max_g, r.max_abs_g);
    }
    const double n = static_cast<double>(results.size());
    const double mean = sum.value() / n;
    CompensatedSum sq;
    for (const auto& r : results) {
        const double d = pick(r) - mean;
        sq.add(d * d);
    }
    Estimate e;
    e.mean = mean;
    e.std_error = std::sqrt(sq.value() / (n - 1.0) / n);
    e.n_paths = results.size();
    e.tail_bound = std::exp(-params.rho * config.t_max) * max_g;
    return e;
}

}  // namespace

Trajectory simulate_augmented(const IntensityPolicy& policy, const ModelParams& params, double p0,
                              const RolloutConfig& config, const SeedPack& seeds) {
    Trajectory trajectory;
    const OuTransition ou(params, config.dt);
    run_path<true>(policy, params, ou, p0, config, seeds, &trajectory);
    return trajectory;
}

PairedEstimate estimate_values(const IntensityPolicy& policy, const ModelParams& params, double p0,
                               std::size_t n_paths, const RolloutConfig& config, std::uint64_t master_seed) {
    const auto results = run_paths(policy, params, p0, n_paths, config, master_seed);
    PairedEstimate out;
    out.instantaneous = summarize(results, [](const PathResult& r) { return r.instantaneous; }, params, config);
    out.stopping = summarize(results, [](const PathResult& r) { return r.stopping; }, params, config);
    out.diff_std_error =
        summarize(results, [](const PathResult& r) { return r.instantaneous - r.stopping; }, params, config)
            .std_error;
    return out;
}

Estimate estimate_value_instantaneous(const IntensityPolicy& policy, const ModelParams& params, double p0,
                                      std::size_t n_paths, const RolloutConfig& config,
                                      std::uint64_t master_seed) {
    return estimate_values(policy, params, p0, n_paths, config, master_seed).instantaneous;
}

Estimate estimate_value_stopping(const IntensityPolicy& policy, const ModelParams& params, double p0,
                                 std::size_t n_paths, const RolloutConfig& config, std::uint64_t master_seed) {
    return estimate_values(policy, params, p0, n_paths, config, master_seed).stopping;
}

std::vector<EquivalenceRow> equivalence_report(const std::vector<ConstantIntensity>& controls,
                                               const std::vector<double>& p0s, const ModelParams& params,
                                               std::size_t n_paths, const RolloutConfig& config,
                                               std::uint64_t master_seed) {
    std::vector<EquivalenceRow> rows;
    for (const auto& control : controls) {
        for (double p0 : p0s) {
            EquivalenceRow row;
            row.alpha = control.alpha();
            row.beta = control.beta();
            row.p0 = p0;
            row.estimate = estimate_values(control, params, p0, n_paths, config, master_seed);
            const double diff = row.estimate.instantaneous.mean - row.estimate.stopping.mean;
            const double se = std::hypot(row.estimate.instantaneous.std_error, row.estimate.stopping.std_error);
            row.z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : INFINITY);
            row.pass = std::abs(row.z) <= 3.0;
            rows.push_back(row);
        }
    }
    return rows;
}

EntropyRollout rollout_value_entropy(const ValueField& field, double p0, std::size_t n_paths,
                                     const RolloutConfig& config, std::uint64_t master_seed) {
    const FieldGibbsPolicy policy(field);
    const auto results = run_paths(policy, field.params, p0, n_paths, config, master_seed);
    EntropyRollout out;
    out.value = summarize(results, [](const PathResult& r) { return r.instantaneous; }, field.params, config);
    out.reward_only =
        summarize(results, [](const PathResult& r) { return r.reward; }, field.params, config).mean;
    out.entropy_penalty =
        summarize(results, [](const PathResult& r) { return r.penalty; }, field.params, config).mean;
    return out;
}

const SweepRow* SweepTable::find(double cap_m, double eta) const {
    for (const auto& row : rows) {
        if (row.cap_m == cap_m && row.eta == eta) return &row;
    }
    return nullptr;
}

namespace {

// Rows selected by `keep`, ordered by `order`, must increase node by node.
template <class Keep, class Order>
bool nondecreasing(const std::vector<SweepRow>& rows, std::pair<std::size_t, std::size_t> window, Keep keep,
                   Order order) {
    constexpr double slack = 1e-8;
    std::vector<const SweepRow*> group;
    for (const auto& row : rows) {
        if (keep(row)) group.push_back(&row);
    }
    std::sort(group.begin(), group.end(), [&](const SweepRow* a, const SweepRow* b) { return order(*a) < order(*b); });
    for (std::size_t k = 1; k < group.size(); ++k) {
        const auto& lo = group[k - 1]->v0;
        const auto& hi = group[k]->v0;
        for (std::size_t i = window.first; i <= window.second && i < lo.size() && i < hi.size(); ++i) {
            if (hi[i] < lo[i] - slack) return false;
        }
    }
    return true;
}

}  // namespace

bool SweepTable::monotone_in_eta(double cap_m, double lo, double hi) const {
    return nondecreasing(rows, window_indices(grid.p_min, grid.h, grid.n_p, lo, hi), [&](const SweepRow& r) { return r.cap_m == cap_m; },
                         [](const SweepRow& r) { return -r.eta; });
}

bool SweepTable::monotone_in_m(double eta, double lo, double hi) const {
    return nondecreasing(rows, window_indices(grid.p_min, grid.h, grid.n_p, lo, hi), [&](const SweepRow& r) { return r.eta == eta; },
                         [](const SweepRow& r) { return r.cap_m; });
}

SweepTable convergence_sweep(const std::vector<double>& cap_ms, const std::vector<double>& etas,
                             const ModelParams& params, const Grid& grid, const SolverOptions& options,
                             double p0) {
    SweepTable table;
    table.grid = grid;
    for (double cap_m : cap_ms) {
        for (double eta : etas) {
            ModelParams local = params;
            local.cap_m = cap_m;
            local.eta = eta;
            const auto field = solve_field(local, grid, options);
            table.rows.push_back({cap_m, eta, field.v0_interp(p0), field.converged(), field.v0});
        }
    }
    return table;
}

}  // namespace expstop
