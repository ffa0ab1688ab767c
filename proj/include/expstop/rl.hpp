#pragma once

/**
 * @file rl.hpp
 * @brief Offline policy iteration with two small value networks.
 *
 * Each outer iteration freezes the Gibbs policy induced by the current nets,
 * augments offline signal paths with simulated regimes, and takes gradient steps
 * on the mean squared TD error
 *
 *   d0 = 1{j=0} (-c dt + e^{-rho dt} (1{j'=0} V0(p') + 1{j'=1} V1(p', b')) - V0(p))
 *   d1 = 1{j=1} (-c dt + e^{-rho dt} (1{j'=1} V1(p', b) + 1{j'=2} G(p', b)) - V1(p, b))
 */

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "expstop/hjb.hpp"
#include "expstop/mc.hpp"
#include "expstop/model.hpp"

namespace expstop {

/// W2 relu(W1 s x + b1) + b2 with s the input scale and 32 hidden units.
class ValueNet {
public:
    static constexpr std::size_t hidden = 32;

    ValueNet() = default;
    explicit ValueNet(std::size_t input_dim, double input_scale = 0.25);

    /// He-uniform first layer, small second layer, zero biases.
    static ValueNet random(std::size_t input_dim, std::mt19937_64& engine, double input_scale = 0.25);

    std::size_t input_dim() const { return input_dim_; }
    double input_scale() const { return input_scale_; }
    std::size_t parameter_count() const { return params_.size(); }

    /// Flattened as [W1 (hidden x input_dim, row-major), b1, W2, b2].
    std::span<const double> parameters() const { return params_; }
    std::span<double> parameters() { return params_; }
    void set_parameters(std::span<const double> values);

    double forward(std::span<const double> x) const;
    double operator()(double p) const;
    double operator()(double p, double b) const;

    /// grad += upstream * d forward(x) / d parameters.
    void accumulate_gradient(std::span<const double> x, double upstream, std::span<double> grad) const;

    bool finite() const;

private:
    std::size_t input_dim_ = 1;
    double input_scale_ = 0.25;
    std::vector<double> params_;
};

/// Gibbs policy read off the nets: Delta1 = V1(p,p) - V0(p), Delta2 = G - V1.
class NetPolicy final : public IntensityPolicy {
public:
    NetPolicy(const ValueNet& v0, const ValueNet& v1, const ModelParams& params)
        : v0_(v0), v1_(v1), params_(params) {}
    StageRate entry(double p) const override;
    StageRate exit(double p, double b) const override;

private:
    const ValueNet& v0_;
    const ValueNet& v1_;
    const ModelParams& params_;
};

/// Offline signal paths sampled at a uniform step.
struct SignalPaths {
    double dt = 0.1;
    std::vector<std::vector<double>> p;  ///< p[path][step], every path the same length
};

/// Exact OU paths with P0 ~ Uniform[p_lo, p_hi]; path i uses SeedPack{seed, i}.
SignalPaths generate_signal_paths(const ModelParams& params, std::size_t n_paths, std::size_t steps, double dt,
                                  double p_lo, double p_hi, std::uint64_t seed);

struct Transition {
    AugmentedState from;
    AugmentedState to;
    double dt = 0.0;
    double entropy_cost = 0.0;  ///< cost of the stage policy at `from`, frozen at augmentation
    std::uint32_t path = 0;
    std::uint32_t sim = 0;
};

struct AugmentConfig {
    double dt = 0.1;
    std::size_t sims_per_path = 10;
    double b_min = -4.0;  ///< holding starts draw b ~ Uniform[b_min, b_max]
    double b_max = 4.0;
    bool suppress_switching = false;  ///< zero intensity and zero cost everywhere
    int threads = 0;
};

/// Simulations [0, I/2) start idle, the rest start holding. Simulation s of path i
/// draws from SeedPack{seed, i * I + s}. Recording stops after the exit step.
std::vector<Transition> augment_paths(const SignalPaths& paths, const IntensityPolicy& policy,
                                      const ModelParams& params, const AugmentConfig& config, std::uint64_t seed);

struct TdError {
    double d0 = 0.0;
    double d1 = 0.0;
};

TdError td_error(const Transition& t, const ValueNet& v0, const ValueNet& v1, const ModelParams& params);
std::vector<TdError> td_errors(std::span<const Transition> batch, const ValueNet& v0, const ValueNet& v1,
                               const ModelParams& params);

enum class GradientMode {
    semi,  ///< targets held constant
    full,  ///< differentiate through the targets as well
};

struct LossGradient {
    double loss = 0.0;            ///< mean of d0^2 + d1^2 over transitions with j in {0, 1}
    std::vector<double> grad_v0;
    std::vector<double> grad_v1;
};

/// Mean squared TD error and its gradient. `indices` selects transitions (all when empty).
LossGradient td_loss(std::span<const Transition> data, std::span<const std::size_t> indices, const ValueNet& v0,
                     const ValueNet& v1, const ModelParams& params, GradientMode mode);

/// Loss with the targets evaluated at frozen nets; its gradient is the semi-gradient.
double frozen_target_loss(std::span<const Transition> data, const ValueNet& v0, const ValueNet& v1,
                          const ValueNet& target_v0, const ValueNet& target_v1, const ModelParams& params);

struct GradientCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

/// Central differences (step h) against td_loss in the given mode.
GradientCheck check_td_gradient(std::span<const Transition> data, const ValueNet& v0, const ValueNet& v1,
                                const ModelParams& params, GradientMode mode, double h = 1e-5);

/// Central differences of forward(x) against accumulate_gradient.
GradientCheck check_net_gradient(const ValueNet& net, std::span<const double> x, double h = 1e-5);

enum class OptimizerKind { adam, sgd };

class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr, std::size_t n_params, double beta1 = 0.9, double beta2 = 0.999,
              double epsilon = 1e-8);
    void step(std::span<double> params, std::span<const double> grad);
    void set_lr(double lr) { lr_ = lr; }

private:
    OptimizerKind kind_;
    double lr_, beta1_, beta2_, epsilon_;
    std::vector<double> m_, v_;
    long t_ = 0;
};

struct TrainConfig {
    double lr = 1e-3;
    double lr_final = 1e-4;          ///< lr decays geometrically to this over the outer iterations
    std::size_t batch = 1024;        ///< 0: full batch
    bool stratify = true;            ///< draw half of each minibatch from each regime
    std::size_t steps_per_iter = 50;
    std::size_t k_max = 200;         ///< outer policy-iteration rounds
    std::size_t sims_per_path = 10;
    double dt = 0.1;
    OptimizerKind optimizer = OptimizerKind::adam;
    GradientMode mode = GradientMode::semi;
    double b_min = -4.0;
    double b_max = 4.0;
    bool suppress_switching = false;
    int threads = 0;
};

struct TrainResult;
/// Called after each outer iteration with the iteration index and the current state.
using TrainObserver = std::function<void(std::size_t, const TrainResult&)>;

struct TrainResult {
    ValueNet v0;
    ValueNet v1;
    std::vector<double> loss_history;  ///< full-data loss after each augmentation
    std::size_t iterations = 0;
};

/// Throws NumericalError when the loss exceeds 1e6 or is not finite.
TrainResult train(const SignalPaths& paths, const ModelParams& params, const TrainConfig& config,
                  std::uint64_t seed, const TrainObserver& observer = {});

struct ErrorSample {
    double p;
    double b;
    double error;  ///< net minus benchmark
};

struct BenchmarkMetrics {
    double rmse_v0 = 0.0;
    double max_v0 = 0.0;
    double rmse_v1 = 0.0;
    double max_v1 = 0.0;
    double v0_range = 0.0;           ///< max - min of the benchmark V0 on the window
    double band_mean_v1 = 0.0;       ///< mean |V1 error| within `band` of the exit boundary
    double outside_mean_v1 = 0.0;
    std::size_t band_nodes = 0;
    std::size_t outside_nodes = 0;
    std::vector<ErrorSample> v1_surface;
};

/// Errors on the window [lo, hi]^2 of the field's grid.
BenchmarkMetrics compare_to_benchmark(const ValueNet& v0, const ValueNet& v1, const ValueField& field,
                                      double lo = -3.2, double hi = 3.2, double band = 0.2);

/// Same metrics for an arbitrary approximation (net or field lookup).
BenchmarkMetrics compare_fields(const std::function<double(double)>& v0, const std::function<double(double, double)>& v1,
                                const ValueField& field, double lo = -3.2, double hi = 3.2, double band = 0.2);

}  // namespace expstop
