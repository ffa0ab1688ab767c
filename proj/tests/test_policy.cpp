#include <cmath>
#include <random>

#include "doctest.h"
#include "expstop/policy.hpp"
#include "oracles.hpp"

using namespace expstop;

TEST_CASE("source_f reference values") {
    CHECK(source_f(0.0) == 0.0);
    CHECK(source_f(1.0) == doctest::Approx(0.5413248546).epsilon(1e-10));
    CHECK(source_f(1.0) == doctest::Approx(std::log(std::exp(1.0) - 1.0)).epsilon(1e-15));
    CHECK(source_f(-3.0) == doctest::Approx(source_f(3.0) - 3.0).epsilon(1e-14));
}

TEST_CASE("source_f matches an extended-precision oracle") {
    for (double y = -30.0; y <= 30.0; y += 0.173) {
        const double ref = static_cast<double>(oracle::source_f(y));
        CHECK(std::abs(source_f(y) - ref) <= 1e-13 * std::max(1.0, std::abs(ref)));
    }
}

TEST_CASE("source_f reflection and asymptotics") {
    for (double y = -30.0; y <= 30.0; y += 0.01) {
        CHECK(std::abs(source_f(-y) - (source_f(y) - y)) <= 1e-12);
    }
    CHECK(std::abs(source_f(50.0) - (50.0 - std::log(50.0))) < 1e-12);
    CHECK(std::isfinite(source_f(5e6)));
    CHECK(std::isfinite(source_f(-5e6)));
    CHECK(source_f(5e6) == doctest::Approx(5e6 - std::log(5e6)).epsilon(1e-15));
    double prev = source_f(-1e3);
    for (double y = -999.0; y <= 1e3; y += 0.5) {
        const double cur = source_f(y);
        CHECK(cur > prev);
        prev = cur;
    }
}

TEST_CASE("source_f derivative is the mean fraction") {
    for (double y : {-20.0, -5.0, -1.0, -1e-2, 0.3, 2.0, 7.0, 25.0}) {
        const double fd = oracle::central_difference([](double x) { return source_f(x); }, y, 1e-5);
        CHECK(fd == doctest::Approx(mean_intensity_fraction(y)).epsilon(1e-6));
    }
}

TEST_CASE("branch continuity") {
    for (double t : {1e-4, 36.0}) {
        for (double s : {1.0, -1.0}) {
            const double y = s * t;
            const double lo = std::nextafter(y, 0.0), hi = std::nextafter(y, s * INFINITY);
            CHECK(std::abs(source_f(lo) - source_f(hi)) <= 1e-10);
            CHECK(std::abs(mean_intensity_fraction(lo) - mean_intensity_fraction(hi)) <= 1e-10);
        }
    }
}

TEST_CASE("mean intensity reference values") {
    CHECK(mean_intensity(0.0, 1e-3, 50.0) == 25.0);
    CHECK(mean_intensity_fraction(2.0) == doctest::Approx(0.6565176).epsilon(1e-7));
    CHECK(mean_intensity(2.0, 1.0, 1.0) == doctest::Approx(static_cast<double>(oracle::mean_fraction(2.0L))).epsilon(1e-14));
    CHECK(mean_intensity(1.0, 1e-5, 50.0) == doctest::Approx(50.0).epsilon(1e-6));
    CHECK(mean_intensity(-1.0, 1e-5, 50.0) < 1e-4);
    for (double y = -30.0; y <= 30.0; y += 0.37) {
        const double m = mean_intensity_fraction(y);
        CHECK(m > 0.0);
        CHECK(m < 1.0);
        CHECK(m == doctest::Approx(static_cast<double>(oracle::mean_fraction(y))).epsilon(1e-11));
    }
}

TEST_CASE("mean intensity reflection") {
    for (double d = -5.0; d <= 5.0; d += 0.05) {
        for (double eta : {1.0, 1e-2, 1e-5}) {
            for (double m : {1.0, 50.0}) {
                CHECK(std::abs(mean_intensity(d, eta, m) + mean_intensity(-d, eta, m) - m) <= 1e-10 * m);
            }
        }
    }
}

TEST_CASE("gibbs pdf normalization and mean against quadrature") {
    CHECK(gibbs_pdf(7.0, {0.0, 1e-2, 50.0}) == doctest::Approx(1.0 / 50.0).epsilon(1e-15));
    CHECK_THROWS_AS(gibbs_pdf(-0.1, {0.0, 1.0, 1.0}), std::domain_error);
    CHECK_THROWS_AS(gibbs_pdf(1.1, {0.0, 1.0, 1.0}), std::domain_error);
    const double mass = oracle::simpson([](double l) { return gibbs_pdf(l, {0.5, 1e-2, 50.0}); }, 0.0, 50.0);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
    const GibbsPolicy g{0.3, 1e-3, 5.0};
    const double mean = oracle::simpson([&](double l) { return l * gibbs_pdf(l, g); }, 0.0, 5.0);
    CHECK(std::abs(mean - g.mean()) <= 1e-8);
}

TEST_CASE("gibbs sampling") {
    CHECK(gibbs_sample({0.0, 1.0, 8.0}, 0.25) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(gibbs_sample({0.0, 1.0, 8.0}, 0.5) == doctest::Approx(4.0).epsilon(1e-15));
    const GibbsPolicy g{0.2, 1e-2, 1.0};
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 1000000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = gibbs_sample(g, u(rng));
        CHECK_LE(x, 1.0);
        s += x;
        s2 += x * x;
    }
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - g.mean()) <= 4.0 * se);
    const double big = gibbs_sample({1.0, 1e-5, 50.0}, 0.3);
    CHECK(big >= 0.0);
    CHECK(big <= 50.0);
    CHECK(big > 49.99);
}

TEST_CASE("entropy cost identity and sign") {
    CHECK(entropy_cost(0.0, 1e-2, 1.0) == 0.0);
    const GibbsPolicy g{0.1, 1e-2, 1.0};
    const double quad = g.eta * oracle::simpson([&](double l) {
        const double pi = gibbs_pdf(l, g);
        return pi * std::log(g.cap_m * pi);
    }, 0.0, 1.0);
    CHECK(std::abs(entropy_cost(0.1, 1e-2, 1.0) - quad) <= 1e-9);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(-5.0, 5.0), le(-5.0, 0.0), lm(0.0, 2.0);
    for (int k = 0; k < 1000; ++k) {
        CHECK(entropy_cost(d(rng), std::pow(10.0, le(rng)), std::pow(10.0, lm(rng))) >= 0.0);
    }
}

TEST_CASE("stage probability") {
    CHECK(stage_probability(0.0, 0.1) == 0.0);
    CHECK(stage_probability(0.5, 0.1) == doctest::Approx(0.04877057).epsilon(1e-7));
    CHECK(stage_probability(1e6, 0.1) <= 1.0);
    CHECK(stage_probability(1e6, 0.1) == doctest::Approx(1.0));
}

TEST_CASE("two-bump density") {
    const PhiDensity phi{0.3, 0.1, 1.0};
    CHECK(phi_mean(phi) == doctest::Approx(0.32).epsilon(1e-14));
    const double mass = oracle::simpson([&](double l) { return phi_pdf(l, phi); }, 0.0, 1.0, 1e-10, 60);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(phi_entropy({0.5, 0.2, 1.0}) == doctest::Approx(std::log(0.4)).epsilon(1e-12));
    CHECK(phi_entropy({0.0, 0.2, 1.0}) == doctest::Approx(std::log(0.2)).epsilon(1e-12));
    CHECK(phi_entropy({1.0, 0.2, 1.0}) == doctest::Approx(std::log(0.2)).epsilon(1e-12));
    CHECK_THROWS_AS(check_phi({0.3, 0.5, 1.0}), std::domain_error);
    CHECK_THROWS_AS(check_phi({1.3, 0.1, 1.0}), std::domain_error);
}

TEST_CASE("joint entropy") {
    const Density uniform = [](double) { return 1.0; };
    CHECK(std::abs(joint_entropy(uniform, uniform, 1.0)) <= 1e-12);
    const GibbsPolicy g{0.1, 1e-2, 1.0};
    const Density gibbs = [&](double l) { return gibbs_pdf(l, g); };
    const double h = joint_entropy(gibbs, uniform, 1.0);
    CHECK(h <= 0.0);
    CHECK(h == doctest::Approx(-entropy_cost(0.1, 1e-2, 1.0) / 1e-2).epsilon(1e-9));
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int k = 0; k < 5; ++k) {
        const GibbsPolicy a{d(rng), 0.5, 2.0}, b{d(rng), 0.5, 2.0};
        const Density pa = [&](double l) { return gibbs_pdf(l, a); };
        const Density pb = [&](double l) { return gibbs_pdf(l, b); };
        CHECK(std::abs(joint_entropy(pa, pb, 2.0) - relative_entropy(pa, 2.0) - relative_entropy(pb, 2.0)) <= 1e-9);
    }
    const Density bad = [](double) { return 2.0; };
    CHECK_THROWS_AS(joint_entropy(bad, uniform, 1.0), std::invalid_argument);
}
