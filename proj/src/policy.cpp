#include "expstop/policy.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace expstop {

namespace {

// Branch thresholds. Beyond kLarge the exponential terms are below double
// resolution relative to the leading asymptotics.
constexpr double kSeriesF = 1e-4;
constexpr double kSeriesMean = 1e-3;
constexpr double kLarge = 36.0;

double x_log_x(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

double source_f(double y) {
    if (std::abs(y) < kSeriesF) {
        const double y2 = y * y;
        return y / 2.0 + y2 / 24.0 - y2 * y2 / 2880.0;
    }
    if (y > kLarge) {
        return y - std::log(y) + std::log1p(-std::exp(-y));
    }
    if (y < -kLarge) {
        // f(y) = f(-y) + y
        return -std::log(-y) + std::log1p(-std::exp(y));
    }
    return std::log(std::expm1(y) / y);
}

double mean_intensity_fraction(double y) {
    if (std::abs(y) < kSeriesMean) {
        return 0.5 + y / 12.0 - y * y * y / 720.0;
    }
    if (y > 0.0) {
        return 1.0 + 1.0 / std::expm1(y) - 1.0 / y;
    }
    const double a = -y;
    return 1.0 / a - 1.0 / std::expm1(a);
}

double mean_intensity(double delta, double eta, double cap_m) {
    if (delta == 0.0) return cap_m / 2.0;
    return cap_m * mean_intensity_fraction(delta * cap_m / eta);
}

double entropy_cost(double delta, double eta, double cap_m) {
    // c / eta = y r(y) - f(y) is even in y
    const double a = std::abs(delta * cap_m / eta);
    double scaled;
    if (a < kSeriesMean) {
        const double a2 = a * a;
        scaled = a2 / 24.0 - a2 * a2 / 960.0 + a2 * a2 * a2 / 36288.0;
    } else if (a > kLarge) {
        scaled = a / std::expm1(a) - 1.0 + std::log(a) - std::log1p(-std::exp(-a));
    } else {
        scaled = a * mean_intensity_fraction(a) - source_f(a);
    }
    return eta * std::max(scaled, 0.0);
}

double stage_probability(double mean_lambda, double dt) { return -std::expm1(-mean_lambda * dt); }

double gibbs_pdf(double lambda, const GibbsPolicy& policy) {
    const double m = policy.cap_m;
    if (!(lambda >= 0.0 && lambda <= m)) {
        throw std::domain_error("gibbs_pdf: lambda outside [0, M]");
    }
    const double a = policy.rate();
    if (a == 0.0) return 1.0 / m;
    if (a > 0.0) {
        return a * std::exp(a * (lambda - m)) / -std::expm1(-a * m);
    }
    return a * std::exp(a * lambda) / std::expm1(a * m);
}

double gibbs_sample(const GibbsPolicy& policy, double u) {
    const double m = policy.cap_m;
    const double a = policy.rate();
    double lambda;
    if (a == 0.0) {
        lambda = u * m;
    } else if (std::abs(a * m) <= 1.0) {
        lambda = std::log1p(u * std::expm1(a * m)) / a;
    } else if (a > 0.0) {
        lambda = m + std::log(u + (1.0 - u) * std::exp(-a * m)) / a;
    } else {
        lambda = std::log((1.0 - u) + u * std::exp(a * m)) / a;
    }
    return std::min(std::max(lambda, 0.0), m);
}

void check_phi(const PhiDensity& phi) {
    if (!(phi.cap_m > 0.0)) throw std::domain_error("phi: M must be positive");
    if (!(phi.m >= 0.0 && phi.m <= phi.cap_m)) throw std::domain_error("phi: m outside [0, M]");
    if (!(phi.delta > 0.0 && phi.delta < 0.5)) throw std::domain_error("phi: delta outside (0, 1/2)");
}

double phi_pdf(double lambda, const PhiDensity& phi) {
    check_phi(phi);
    const double m = phi.cap_m;
    if (!(lambda >= 0.0 && lambda <= m)) throw std::domain_error("phi_pdf: lambda outside [0, M]");
    const double width = phi.delta * m;
    if (lambda <= width) return (m - phi.m) / (width * m);
    if (lambda >= m - width) return phi.m / (width * m);
    return 0.0;
}

double phi_mean(const PhiDensity& phi) {
    check_phi(phi);
    return phi.m + phi.delta * (phi.cap_m - 2.0 * phi.m) / 2.0;
}

double phi_entropy(const PhiDensity& phi) {
    check_phi(phi);
    const double w_high = phi.m / phi.cap_m;
    const double w_low = 1.0 - w_high;
    return std::log(phi.delta) - x_log_x(w_low) - x_log_x(w_high);
}

namespace {

// 8-point Gauss-Legendre rule on [-1, 1]
constexpr std::array<double, 4> kGlNodes = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                            0.9602898564975363};
constexpr std::array<double, 4> kGlWeights = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                              0.1012285362903763};

template <class F>
double gauss_legendre(F&& fn, double lo, double hi, int panels) {
    const double width = (hi - lo) / panels;
    double total = 0.0;
    for (int k = 0; k < panels; ++k) {
        const double mid = lo + (k + 0.5) * width;
        const double half = width / 2.0;
        double panel = 0.0;
        for (std::size_t q = 0; q < kGlNodes.size(); ++q) {
            panel += kGlWeights[q] * (fn(mid - half * kGlNodes[q]) + fn(mid + half * kGlNodes[q]));
        }
        total += panel * half;
    }
    return total;
}

void check_normalized(const Density& pi, double cap_m, int panels, const char* which) {
    const double mass = gauss_legendre(pi, 0.0, cap_m, panels);
    if (std::abs(mass - 1.0) > 1e-6) {
        throw std::invalid_argument(std::string("joint_entropy: ") + which + " integrates to " +
                                    std::to_string(mass));
    }
}

}  // namespace

double relative_entropy(const Density& pi, double cap_m, int panels) {
    return -gauss_legendre([&](double lambda) { return x_log_x(cap_m * pi(lambda)) / cap_m; }, 0.0, cap_m,
                           panels);
}

double joint_entropy(const Density& pi1, const Density& pi2, double cap_m, int panels) {
    check_normalized(pi1, cap_m, panels, "first density");
    check_normalized(pi2, cap_m, panels, "second density");
    return relative_entropy(pi1, cap_m, panels) + relative_entropy(pi2, cap_m, panels);
}

}  // namespace expstop
