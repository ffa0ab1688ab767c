#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "expstop/expstop.h"

namespace {

struct Config {
    expstop_config* ptr = nullptr;
    Config() { REQUIRE(expstop_config_default(&ptr) == EXPSTOP_OK); }
    ~Config() { expstop_config_free(ptr); }
};

}  // namespace

TEST_CASE("version and string ownership") {
    CHECK(std::strlen(expstop_version()) > 0);
    Config c;
    char* text = nullptr;
    REQUIRE(expstop_config_to_json(c.ptr, &text) == EXPSTOP_OK);
    CHECK(std::string(text).find("\"cap_m\"") != std::string::npos);
    expstop_string_free(text);
}

TEST_CASE("config errors carry status and message") {
    expstop_config* c = nullptr;
    CHECK(expstop_config_parse("{", &c) == EXPSTOP_CONFIG);
    CHECK(std::strlen(expstop_last_error()) > 0);
    CHECK(expstop_config_parse(R"({"bogus": 1})", &c) == EXPSTOP_CONFIG);
    CHECK(std::string(expstop_last_error()).find("bogus") != std::string::npos);
    CHECK(expstop_config_parse(R"({"model": {"sigma": -1}})", &c) == EXPSTOP_VALIDATION);
    CHECK(expstop_config_load("/nonexistent.json", &c) == EXPSTOP_CONFIG);
    CHECK(expstop_config_parse(nullptr, &c) == EXPSTOP_CONFIG);
    REQUIRE(expstop_config_parse(R"({"model": {"eta": 0.01}})", &c) == EXPSTOP_OK);
    CHECK(expstop_config_set(c, "grid.h_b=0.1") == EXPSTOP_VALIDATION);
    CHECK(expstop_config_set(c, "grid.h=0.1") == EXPSTOP_OK);
    CHECK(expstop_config_set(c, "no_equals") == EXPSTOP_CONFIG);
    expstop_config_free(c);
}

TEST_CASE("closed-form math") {
    CHECK(expstop_source_f(1.0) == doctest::Approx(0.5413248546).epsilon(1e-10));
    CHECK(expstop_mean_intensity(0.0, 1.0, 50.0) == 25.0);
    CHECK(expstop_entropy_cost(0.0, 1.0, 50.0) == 0.0);
    CHECK(expstop_stage_probability(0.5, 0.1) == doctest::Approx(0.04877057).epsilon(1e-7));
    CHECK(expstop_gibbs_pdf(3.0, 0.0, 1.0, 50.0) == doctest::Approx(0.02));
    CHECK(std::isnan(expstop_gibbs_pdf(-1.0, 0.0, 1.0, 50.0)));
    Config c;
    CHECK(expstop_payoff(c.ptr, 2.0, 0.0) == 1.0);
    CHECK(expstop_payoff(c.ptr, 0.0, 0.0) == -2.0);
    double mean = 0, var = 0;
    REQUIRE(expstop_ou_moments(c.ptr, 1.0, 10.0, &mean, &var) == EXPSTOP_OK);
    CHECK(mean == doctest::Approx(0.3678794).epsilon(1e-7));
    CHECK(var == doctest::Approx(0.1729329).epsilon(1e-7));
    CHECK(expstop_ou_moments(c.ptr, 1.0, 10.0, nullptr, &var) == EXPSTOP_CONFIG);
}

TEST_CASE("field handle") {
    Config c;
    REQUIRE(expstop_config_set(c.ptr, "grid.h=0.1") == EXPSTOP_OK);
    expstop_field* f = nullptr;
    REQUIRE(expstop_solve(c.ptr, &f) == EXPSTOP_OK);
    CHECK(expstop_field_converged(f) == 1);
    const size_t np = expstop_field_size_p(f), nb = expstop_field_size_b(f);
    CHECK(np == 81);
    CHECK(nb == 81);
    std::vector<double> v0(np), v1(np * nb);
    CHECK(expstop_field_v0(f, v0.data(), v0.size()) == np);
    CHECK(expstop_field_v1(f, v1.data(), v1.size() + 10) == np * nb);
    CHECK(expstop_field_v0(f, v0.data(), 3) == 3);
    CHECK(expstop_field_v1_at(f, 4.0, 0.0) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
    CHECK(expstop_field_v0_at(f, -4.0) == v0[0]);
    double pd = 99.0;
    REQUIRE(expstop_field_entry_boundary(f, &pd) == 1);
    CHECK(pd < 0.0);
    CHECK(pd > -3.2);
    expstop_field_free(f);

    REQUIRE(expstop_config_set(c.ptr, "solver.max_iter=2") == EXPSTOP_OK);
    f = nullptr;
    CHECK(expstop_solve(c.ptr, &f) == EXPSTOP_NUMERICAL);
    REQUIRE(f != nullptr);
    CHECK(expstop_field_converged(f) == 0);
    expstop_field_free(f);
    CHECK(expstop_field_size_p(nullptr) == 0);
}

TEST_CASE("run a command") {
    const auto dir = std::filesystem::temp_directory_path() / ("expstop_capi_" + std::to_string(std::random_device{}()));
    Config c;
    REQUIRE(expstop_config_set(c.ptr, "grid.h=0.1") == EXPSTOP_OK);
    REQUIRE(expstop_config_set(c.ptr, ("output_dir=" + dir.string()).c_str()) == EXPSTOP_OK);
    char* summary = nullptr;
    REQUIRE(expstop_run("solve", c.ptr, &summary) == EXPSTOP_OK);
    CHECK(std::string(summary).find("\"cache_hit\":false") != std::string::npos);
    expstop_string_free(summary);
    CHECK(std::filesystem::exists(dir / "v0.csv"));
    CHECK(expstop_run("solve", c.ptr, nullptr) == EXPSTOP_OK);
    CHECK(expstop_run("nonsense", c.ptr, nullptr) == EXPSTOP_CONFIG);
    std::filesystem::remove_all(dir);
}
