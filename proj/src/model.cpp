#include "expstop/model.hpp"

#include <cmath>

namespace expstop {

double utility(const ModelParams& params, double x) {
    if (x >= 0.0) {
        return std::pow(x, params.varpi);
    }
    return -params.k_loss * std::pow(-x, params.varpi);
}

double payoff_g(const ModelParams& params, double p, double b) {
    return utility(params, params.gamma * p - params.iota * b - params.psi - params.ref_r);
}

GaussianMoments ou_moments(const ModelParams& params, double p0, double t) {
    const double decay = std::exp(-params.theta * t);
    // 1 - exp(-2 theta t) without cancellation for small t
    const double spread = -std::expm1(-2.0 * params.theta * t);
    return {params.pbar + (p0 - params.pbar) * decay,
            params.sigma * params.sigma * spread / (2.0 * params.theta)};
}

double ou_exact_step(const ModelParams& params, double p, double dt, double z) {
    const auto [mean, variance] = ou_moments(params, p, dt);
    return mean + std::sqrt(variance) * z;
}

OuTransition::OuTransition(const ModelParams& params, double dt)
    : pbar_(params.pbar),
      decay_(std::exp(-params.theta * dt)),
      sd_(std::sqrt(ou_moments(params, 0.0, dt).variance)) {}

double euler_maruyama_step(const ScalarField& drift, const ScalarField& volatility, double p, double dt,
                           double z) {
    return p + drift(p) * dt + volatility(p) * std::sqrt(dt) * z;
}

std::vector<std::string> validate_params(const ModelParams& params) {
    std::vector<std::string> out;
    auto require = [&](bool ok, const char* what) {
        if (!ok) out.emplace_back(what);
    };
    const bool finite = std::isfinite(params.theta) && std::isfinite(params.pbar) &&
                        std::isfinite(params.sigma) && std::isfinite(params.rho) &&
                        std::isfinite(params.gamma) && std::isfinite(params.iota) &&
                        std::isfinite(params.psi) && std::isfinite(params.ref_r) &&
                        std::isfinite(params.varpi) && std::isfinite(params.k_loss) &&
                        std::isfinite(params.cap_m) && std::isfinite(params.eta);
    require(finite, "all parameters finite");
    require(params.theta > 0.0, "theta > 0");
    require(params.sigma > 0.0, "sigma > 0");
    require(params.rho > 0.0, "rho > 0");
    require(params.cap_m > 0.0, "cap_m > 0");
    require(params.eta > 0.0, "eta > 0");
    require(params.varpi > 0.0 && params.varpi <= 1.0, "varpi in (0,1]");
    require(params.k_loss > 0.0, "k_loss > 0");
    require(params.psi >= 0.0, "psi >= 0");
    require(params.ref_r >= 0.0, "ref_r >= 0");
    return out;
}

std::vector<std::string> validate_pairs_trading(const ModelParams& params) {
    auto out = validate_params(params);
    if (params.gamma != 1.0) out.emplace_back("gamma == 1 for the grid solver");
    if (params.iota != 1.0) out.emplace_back("iota == 1 for the grid solver");
    return out;
}

}  // namespace expstop
