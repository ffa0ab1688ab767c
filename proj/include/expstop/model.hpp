#pragma once

/**
 * @file model.hpp
 * @brief Market dynamics and preferences for the entry/exit trading problem.
 *
 * The signal is an Ornstein-Uhlenbeck process
 *   dP_t = theta (pbar - P_t) dt + sigma dW_t
 * and a closed round trip entered at b and exited at p pays
 *   G(p, b) = U(gamma p - iota b - psi - ref_r)
 * with the S-shaped power utility U(x) = x^varpi (x >= 0), -k |x|^varpi (x < 0).
 */

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace expstop {

/// Market, preference and exploration constants. Defaults are the baseline pairs-trading set.
struct ModelParams {
    double theta = 0.1;    ///< mean-reversion rate
    double pbar = 0.0;     ///< long-run mean
    double sigma = 0.2;    ///< volatility
    double rho = 0.05;     ///< discount rate
    double gamma = 1.0;    ///< sale scaling
    double iota = 1.0;     ///< purchase scaling
    double psi = 0.0;      ///< fixed cost
    double ref_r = 1.0;    ///< utility reference point
    double varpi = 0.5;    ///< utility exponent in (0, 1]
    double k_loss = 2.0;   ///< loss-aversion multiplier
    double cap_m = 50.0;   ///< intensity cap M
    double eta = 1e-5;     ///< exploration temperature

    bool operator==(const ModelParams&) const = default;
};

/// Trading stage: waiting to enter, holding the position, round trip finished.
enum class Regime : std::uint8_t { idle = 0, holding = 1, done = 2 };

struct AugmentedState {
    double p = 0.0;
    Regime j = Regime::idle;
    double b = 0.0;  ///< entry signal; 0 while idle
};

double utility(const ModelParams& params, double x);

/// Realized utility of a round trip entered at signal b and closed at p.
double payoff_g(const ModelParams& params, double p, double b);

struct GaussianMoments {
    double mean;
    double variance;
};

/// Law of P_t given P_0 = p0. `t` may be +infinity (stationary law).
GaussianMoments ou_moments(const ModelParams& params, double p0, double t);

/// One exact transition of the OU process over dt driven by the standard normal draw z.
double ou_exact_step(const ModelParams& params, double p, double dt, double z);

/// Precomputed exact OU transition for a fixed dt; used in simulation hot loops.
class OuTransition {
public:
    OuTransition(const ModelParams& params, double dt);

    double operator()(double p, double z) const { return pbar_ + (p - pbar_) * decay_ + sd_ * z; }

    double decay() const { return decay_; }
    double stddev() const { return sd_; }

private:
    double pbar_;
    double decay_;
    double sd_;
};

using ScalarField = std::function<double(double)>;

/// Euler-Maruyama step for a user-supplied scalar diffusion. Not used by the shipped experiments.
double euler_maruyama_step(const ScalarField& drift, const ScalarField& volatility, double p, double dt,
                           double z);

/// Returns one message per violated constraint; empty when the parameters are usable.
std::vector<std::string> validate_params(const ModelParams& params);

/// Extra constraints of the pairs-trading specialization solved on the grid (gamma = iota = 1).
std::vector<std::string> validate_pairs_trading(const ModelParams& params);

}  // namespace expstop
