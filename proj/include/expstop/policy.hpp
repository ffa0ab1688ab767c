#pragma once

/**
 * @file policy.hpp
 * @brief Closed-form Gibbs exploration laws on the intensity interval [0, M].
 *
 * For an advantage Delta, temperature eta and cap M the optimal density is the
 * truncated exponential pi(lambda) ~ exp(lambda Delta / eta). Everything here
 * is expressed through the dimensionless y = Delta M / eta and evaluated with
 * branch plans that stay finite for |y| up to the double range.
 */

#include <functional>

namespace expstop {

/// ln((e^y - 1) / y), continuous at y = 0. The HJB source is eta * source_f(y).
double source_f(double y);

/// Mean of the Gibbs law divided by M: 1/(1 - e^-y) - 1/y, in (0, 1). Equals f'(y).
double mean_intensity_fraction(double y);

/// Mean intensity of the Gibbs law for advantage `delta`; M/2 when delta = 0.
double mean_intensity(double delta, double eta, double cap_m);

/// eta * integral pi ln(M pi) at the Gibbs optimum, i.e. mean * delta - eta * f(y). Nonnegative.
double entropy_cost(double delta, double eta, double cap_m);

/// 1 - exp(-mean_lambda dt): probability that the stage ends within one step.
double stage_probability(double mean_lambda, double dt);

struct GibbsPolicy {
    double delta = 0.0;
    double eta = 1.0;
    double cap_m = 1.0;

    double y() const { return delta * cap_m / eta; }
    double rate() const { return delta / eta; }
    double mean() const { return mean_intensity(delta, eta, cap_m); }
};

/// Density at lambda; throws std::domain_error outside [0, M].
double gibbs_pdf(double lambda, const GibbsPolicy& policy);

/// Inverse-CDF draw from a uniform u in (0, 1); result lies in [0, M].
double gibbs_sample(const GibbsPolicy& policy, double u);

/// Two-bump density with approximate mean m and spread delta.
struct PhiDensity {
    double m = 0.0;
    double delta = 0.25;
    double cap_m = 1.0;
};

/// Throws std::domain_error unless m in [0, M], delta in (0, 1/2), M > 0.
void check_phi(const PhiDensity& phi);
double phi_pdf(double lambda, const PhiDensity& phi);
double phi_mean(const PhiDensity& phi);
/// -integral Phi ln(M Phi); lies in [ln delta, ln 2 delta].
double phi_entropy(const PhiDensity& phi);

using Density = std::function<double(double)>;

/// -integral pi ln(M pi) over [0, M] by composite Gauss-Legendre quadrature.
double relative_entropy(const Density& pi, double cap_m, int panels = 4096);

/// Entropy of the product law pi1 x pi2 relative to the uniform law on [0, M]^2.
/// Throws std::invalid_argument if either input is not normalized to 1e-6.
double joint_entropy(const Density& pi1, const Density& pi2, double cap_m, int panels = 4096);

}  // namespace expstop
