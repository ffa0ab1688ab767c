#pragma once

/**
 * @file mc.hpp
 * @brief Seeded simulation of the augmented state (P, J, B) under intensity controls.
 *
 * Regime switches are Cox-process jumps: the cumulative effective intensity of the
 * active stage is compared against that stage's unit exponential seed (E^a for entry,
 * E^b for exit). With intensity frozen over a step this is the same law as a
 * Bernoulli(1 - exp(-lambda dt)) switch at the end of the step, and it lets
 * different controls share the primitive randomness of a path.
 */

#include <cstdint>
#include <optional>
#include <vector>

#include "expstop/hjb.hpp"
#include "expstop/model.hpp"
#include "expstop/rng.hpp"

namespace expstop {

/// Mean intensity and exploration cost of the stage policy at a state.
struct StageRate {
    double intensity = 0.0;
    double entropy_cost = 0.0;
};

/// Source of per-state stage intensities (constant controls, a solved field, learned nets).
class IntensityPolicy {
public:
    virtual ~IntensityPolicy() = default;
    virtual StageRate entry(double p) const = 0;
    virtual StageRate exit(double p, double b) const = 0;
};

/// Deterministic controls alpha (entry) and beta (exit); no exploration cost.
class ConstantIntensity final : public IntensityPolicy {
public:
    ConstantIntensity(double alpha, double beta) : alpha_(alpha), beta_(beta) {}
    StageRate entry(double) const override { return {alpha_, 0.0}; }
    StageRate exit(double, double) const override { return {beta_, 0.0}; }
    double alpha() const { return alpha_; }
    double beta() const { return beta_; }

private:
    double alpha_;
    double beta_;
};

/// Gibbs exploration policy induced by the advantages of a solved value field.
class FieldGibbsPolicy final : public IntensityPolicy {
public:
    explicit FieldGibbsPolicy(const ValueField& field) : field_(field) {}
    StageRate entry(double p) const override;
    StageRate exit(double p, double b) const override;

private:
    const ValueField& field_;
};

/// Gibbs stage rate for an advantage under the given parameters.
StageRate gibbs_rate(double advantage, const ModelParams& params);

enum class RewardRule {
    left_riemann,  ///< rate at the left point times dt
    exact_step,    ///< rate integrated over the step against discount and stage survival
};

struct RolloutConfig {
    double dt = 0.01;
    double t_max = 200.0;
    RewardRule rule = RewardRule::left_riemann;
    int threads = 0;
};

struct Trajectory {
    double dt = 0.0;
    std::vector<AugmentedState> states;
    std::optional<double> entry_time;
    std::optional<double> exit_time;
    double discounted_reward = 0.0;      ///< running reward minus exploration cost, discounted
    double stopping_payoff = 0.0;        ///< e^{-rho nu} G(P_nu, P_tau), zero without exit
    double entropy_penalty_accum = 0.0;  ///< discounted exploration cost (>= 0)
    double max_abs_payoff = 0.0;         ///< sup |G| over visited states
    bool truncated = false;              ///< reached t_max before exit
};

/// Simulates one path from (p0, idle, 0). Stops recording once the round trip closes.
Trajectory simulate_augmented(const IntensityPolicy& policy, const ModelParams& params, double p0,
                              const RolloutConfig& config, const SeedPack& seeds);

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    double tail_bound = 0.0;  ///< e^{-rho t_max} sup|G| over visited states
};

struct PairedEstimate {
    Estimate instantaneous;
    Estimate stopping;
    double diff_std_error = 0.0;  ///< standard error of the pathwise difference
};

/// Both value functionals from the same paths (path i uses SeedPack{master_seed, i}).
PairedEstimate estimate_values(const IntensityPolicy& policy, const ModelParams& params, double p0,
                               std::size_t n_paths, const RolloutConfig& config, std::uint64_t master_seed);

Estimate estimate_value_instantaneous(const IntensityPolicy& policy, const ModelParams& params, double p0,
                                      std::size_t n_paths, const RolloutConfig& config,
                                      std::uint64_t master_seed);

Estimate estimate_value_stopping(const IntensityPolicy& policy, const ModelParams& params, double p0,
                                 std::size_t n_paths, const RolloutConfig& config, std::uint64_t master_seed);

struct EquivalenceRow {
    double alpha = 0.0;
    double beta = 0.0;
    double p0 = 0.0;
    PairedEstimate estimate;
    double z = 0.0;  ///< (instantaneous - stopping) / sqrt(se1^2 + se2^2); 0 when both are exact
    bool pass = false;
};

/// Runs both estimators on shared seeds for every (control, p0) pair; passes when |z| <= 3.
std::vector<EquivalenceRow> equivalence_report(const std::vector<ConstantIntensity>& controls,
                                               const std::vector<double>& p0s, const ModelParams& params,
                                               std::size_t n_paths, const RolloutConfig& config,
                                               std::uint64_t master_seed);

struct EntropyRollout {
    Estimate value;              ///< entropy-regularized objective
    double reward_only = 0.0;    ///< mean discounted reward without the exploration cost
    double entropy_penalty = 0.0;///< mean discounted exploration cost
};

/// Rollout of the field's Gibbs policy from (p0, idle, 0).
EntropyRollout rollout_value_entropy(const ValueField& field, double p0, std::size_t n_paths,
                                     const RolloutConfig& config, std::uint64_t master_seed);

struct SweepRow {
    double cap_m = 0.0;
    double eta = 0.0;
    double v0_at_p0 = 0.0;
    bool converged = false;
    std::vector<double> v0;
};

struct SweepTable {
    Grid grid;
    std::vector<SweepRow> rows;  ///< M-major, in the order given

    const SweepRow* find(double cap_m, double eta) const;
    /// V0 fields at this M nondecreasing node by node on [lo, hi] as eta decreases (slack 1e-8).
    bool monotone_in_eta(double cap_m, double lo = -3.2, double hi = 3.2) const;
    /// V0 fields at this eta nondecreasing node by node on [lo, hi] as M increases (slack 1e-8).
    bool monotone_in_m(double eta, double lo = -3.2, double hi = 3.2) const;
};

/// Solves the HJB system for every (M, eta) and tabulates V0(p0).
SweepTable convergence_sweep(const std::vector<double>& cap_ms, const std::vector<double>& etas,
                             const ModelParams& params, const Grid& grid, const SolverOptions& options,
                             double p0);

}  // namespace expstop
