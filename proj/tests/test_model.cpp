#include <cmath>
#include <random>

#include "doctest.h"
#include "expstop/model.hpp"

using namespace expstop;

namespace {

bool has(const std::vector<std::string>& v, const std::string& s) {
    for (const auto& x : v) {
        if (x == s) return true;
    }
    return false;
}

struct Moments {
    double mean, var, se_mean, se_var;
};

template <class Draw>
Moments sample_moments(std::size_t n, Draw&& draw) {
    double s = 0, s2 = 0, s4 = 0;
    std::vector<double> xs(n);
    for (auto& x : xs) {
        x = draw();
        s += x;
    }
    const double mean = s / n;
    for (double x : xs) {
        const double d = x - mean;
        s2 += d * d;
        s4 += d * d * d * d;
    }
    const double var = s2 / (n - 1);
    const double m4 = s4 / n;
    return {mean, var, std::sqrt(var / n), std::sqrt((m4 - var * var) / n)};
}

}  // namespace

TEST_CASE("utility values and kink") {
    const ModelParams p;
    CHECK(utility(p, 1.0) == 1.0);
    CHECK(utility(p, -1.0) == -2.0);
    CHECK(utility(p, 0.0) == 0.0);
    CHECK(utility(p, 4.0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("utility is strictly increasing and Holder") {
    const ModelParams p;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    const double c = 2.0 * std::max(1.0, p.k_loss);
    for (int k = 0; k < 2000; ++k) {
        double x = u(rng), y = u(rng);
        if (x == y) continue;
        if (x > y) std::swap(x, y);
        CHECK(utility(p, x) < utility(p, y));
        CHECK(std::abs(utility(p, x) - utility(p, y)) <= c * std::pow(y - x, p.varpi) + 1e-12);
    }
}

TEST_CASE("payoff at the baseline") {
    const ModelParams p;
    CHECK(payoff_g(p, 2.0, 0.0) == 1.0);
    CHECK(payoff_g(p, 0.0, 0.0) == -2.0);
    CHECK(payoff_g(p, 1.0, 0.0) == 0.0);
    CHECK(payoff_g(p, 4.0, 0.0) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
}

TEST_CASE("payoff is translation invariant and monotone") {
    const ModelParams p;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int k = 0; k < 500; ++k) {
        const double a = u(rng), b = u(rng), c = u(rng);
        CHECK(payoff_g(p, a + c, b + c) == doctest::Approx(payoff_g(p, a, b)).epsilon(1e-12));
        CHECK(payoff_g(p, a + 0.1, b) >= payoff_g(p, a, b));
        CHECK(payoff_g(p, a, b + 0.1) <= payoff_g(p, a, b));
    }
}

TEST_CASE("OU moments closed forms") {
    const ModelParams p;
    auto m = ou_moments(p, 1.0, 0.0);
    CHECK(m.mean == 1.0);
    CHECK(m.variance == 0.0);
    m = ou_moments(p, 1.0, 10.0);
    CHECK(m.mean == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(m.variance == doctest::Approx(0.2 * (1.0 - std::exp(-2.0))).epsilon(1e-14));
    CHECK(m.mean == doctest::Approx(0.3678794).epsilon(1e-7));
    CHECK(m.variance == doctest::Approx(0.1729329).epsilon(1e-7));
    m = ou_moments(p, 0.0, INFINITY);
    CHECK(m.mean == 0.0);
    CHECK(m.variance == doctest::Approx(0.2).epsilon(1e-15));
    m = ou_moments(p, 0.5, 1e-12);
    CHECK(m.variance == doctest::Approx(p.sigma * p.sigma * 1e-12).epsilon(1e-9));
}

TEST_CASE("exact OU step") {
    const ModelParams p;
    CHECK(ou_exact_step(p, 1.0, 10.0, 0.0) == doctest::Approx(0.3678794).epsilon(1e-7));
    CHECK(ou_exact_step(p, p.pbar, 3.7, 0.0) == p.pbar);
    const OuTransition step(p, 10.0);
    CHECK(step(1.0, 0.5) == doctest::Approx(ou_exact_step(p, 1.0, 10.0, 0.5)).epsilon(1e-15));
}

TEST_CASE("exact OU step matches its moments in distribution") {
    const ModelParams p;
    const auto target = ou_moments(p, 1.0, 10.0);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z(0.0, 1.0);
    const auto s = sample_moments(1000000, [&] { return ou_exact_step(p, 1.0, 10.0, z(rng)); });
    CHECK(std::abs(s.mean - target.mean) <= 4.0 * s.se_mean);
    CHECK(std::abs(s.var - target.variance) <= 4.0 * s.se_var);
}

TEST_CASE("chained OU steps equal one long step") {
    const ModelParams p;
    const auto target = ou_moments(p, 1.0, 7.0);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z(0.0, 1.0);
    const auto s = sample_moments(500000, [&] {
        return ou_exact_step(p, ou_exact_step(p, 1.0, 3.0, z(rng)), 4.0, z(rng));
    });
    CHECK(std::abs(s.mean - target.mean) <= 4.0 * s.se_mean);
    CHECK(std::abs(s.var - target.variance) <= 4.0 * s.se_var);
}

TEST_CASE("Euler-Maruyama agrees with the exact mean for small steps") {
    const ModelParams p;
    const ScalarField drift = [&](double x) { return p.theta * (p.pbar - x); };
    const ScalarField vol = [&](double) { return p.sigma; };
    double x = 1.0;
    for (int k = 0; k < 10000; ++k) x = euler_maruyama_step(drift, vol, x, 1e-3, 0.0);
    CHECK(x == doctest::Approx(ou_moments(p, 1.0, 10.0).mean).epsilon(1e-4));
}

TEST_CASE("parameter validation") {
    ModelParams p;
    CHECK(validate_params(p).empty());
    CHECK(validate_pairs_trading(p).empty());
    p.varpi = 1.5;
    CHECK(has(validate_params(p), "varpi in (0,1]"));
    p = {};
    p.eta = 0.0;
    CHECK(has(validate_params(p), "eta > 0"));
    p = {};
    p.theta = NAN;
    CHECK(has(validate_params(p), "all parameters finite"));
    p = {};
    p.gamma = 1.2;
    CHECK(validate_params(p).empty());
    CHECK(!validate_pairs_trading(p).empty());
}
