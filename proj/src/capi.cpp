#include "expstop/expstop.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "expstop/config.hpp"
#include "expstop/io.hpp"
#include "expstop/policy.hpp"
#include "expstop/tridiag.hpp"
#include "expstop/workflows.hpp"

struct expstop_config {
    expstop::ExperimentConfig value;
};

struct expstop_field {
    expstop::ValueField value;
};

namespace {

thread_local std::string last_error;

expstop_status fail(expstop_status status, const std::string& message) {
    last_error = message;
    return status;
}

char* duplicate(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <class F>
expstop_status guarded(F&& body) {
    try {
        body();
        return EXPSTOP_OK;
    } catch (const expstop::ValidationError& e) {
        return fail(EXPSTOP_VALIDATION, e.what());
    } catch (const expstop::ConfigError& e) {
        return fail(EXPSTOP_CONFIG, e.what());
    } catch (const expstop::IoError& e) {
        return fail(EXPSTOP_CONFIG, e.what());
    } catch (const expstop::NumericalError& e) {
        return fail(EXPSTOP_NUMERICAL, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(EXPSTOP_VALIDATION, e.what());
    } catch (const std::domain_error& e) {
        return fail(EXPSTOP_VALIDATION, e.what());
    } catch (const std::exception& e) {
        return fail(EXPSTOP_NUMERICAL, e.what());
    } catch (...) {
        return fail(EXPSTOP_NUMERICAL, "unknown error");
    }
}

template <class F>
double nan_on_error(F&& body) {
    try {
        return body();
    } catch (const std::exception& e) {
        last_error = e.what();
        return NAN;
    }
}

}  // namespace

extern "C" {

const char* expstop_version(void) { return "1.0.0"; }

const char* expstop_last_error(void) { return last_error.c_str(); }

void expstop_string_free(char* s) { delete[] s; }

expstop_status expstop_config_default(expstop_config** out) {
    if (!out) return fail(EXPSTOP_CONFIG, "null output pointer");
    return guarded([&] { *out = new expstop_config{}; });
}

expstop_status expstop_config_parse(const char* json, expstop_config** out) {
    if (!json || !out) return fail(EXPSTOP_CONFIG, "null argument");
    return guarded([&] { *out = new expstop_config{expstop::parse_config(json)}; });
}

expstop_status expstop_config_load(const char* path, expstop_config** out) {
    if (!path || !out) return fail(EXPSTOP_CONFIG, "null argument");
    return guarded([&] { *out = new expstop_config{expstop::load_config(path)}; });
}

expstop_status expstop_config_set(expstop_config* config, const char* assignment) {
    if (!config || !assignment) return fail(EXPSTOP_CONFIG, "null argument");
    return guarded([&] { config->value = expstop::apply_overrides(config->value, {assignment}); });
}

expstop_status expstop_config_to_json(const expstop_config* config, char** out) {
    if (!config || !out) return fail(EXPSTOP_CONFIG, "null argument");
    return guarded([&] { *out = duplicate(expstop::config_to_json(config->value)); });
}

void expstop_config_free(expstop_config* config) { delete config; }

expstop_status expstop_run(const char* command, const expstop_config* config, char** summary) {
    if (!command || !config) return fail(EXPSTOP_CONFIG, "null argument");
    expstop::CommandResult result;
    const auto status = guarded([&] { result = expstop::run_command(command, config->value); });
    if (status != EXPSTOP_OK) return status;
    if (summary) *summary = duplicate(result.summary);
    if (result.status != expstop::Status::ok) last_error = result.summary;
    return static_cast<expstop_status>(result.status);
}

expstop_status expstop_solve(const expstop_config* config, expstop_field** out) {
    if (!config || !out) return fail(EXPSTOP_CONFIG, "null argument");
    return guarded([&] {
        const auto& c = config->value;
        auto* field = new expstop_field{expstop::solve_field(c.model, c.grid, c.solver)};
        *out = field;
        if (!field->value.converged()) throw expstop::NumericalError("solver did not converge within max_iter");
    });
}

int expstop_field_converged(const expstop_field* field) { return field && field->value.converged() ? 1 : 0; }

size_t expstop_field_size_p(const expstop_field* field) { return field ? field->value.grid.n_p : 0; }

size_t expstop_field_size_b(const expstop_field* field) { return field ? field->value.grid.n_b : 0; }

size_t expstop_field_v0(const expstop_field* field, double* out, size_t n) {
    if (!field || !out) return 0;
    const size_t k = std::min(n, field->value.v0.size());
    std::memcpy(out, field->value.v0.data(), k * sizeof(double));
    return k;
}

size_t expstop_field_v1(const expstop_field* field, double* out, size_t n) {
    if (!field || !out) return 0;
    const size_t k = std::min(n, field->value.v1.size());
    std::memcpy(out, field->value.v1.data(), k * sizeof(double));
    return k;
}

double expstop_field_v0_at(const expstop_field* field, double p) {
    return field ? field->value.v0_interp(p) : NAN;
}

double expstop_field_v1_at(const expstop_field* field, double p, double b) {
    return field ? field->value.v1_interp(p, b) : NAN;
}

int expstop_field_entry_boundary(const expstop_field* field, double* p_dagger) {
    if (!field) return 0;
    const auto& f = field->value;
    const auto entry = expstop::free_boundary_entry(expstop::advantage_entry(f.v0, f.v1_diagonal()), f.grid);
    if (!entry.p_dagger) return 0;
    if (p_dagger) *p_dagger = *entry.p_dagger;
    return 1;
}

void expstop_field_free(expstop_field* field) { delete field; }

double expstop_source_f(double y) {
    return nan_on_error([&] { return expstop::source_f(y); });
}

double expstop_mean_intensity(double delta, double eta, double cap_m) {
    return nan_on_error([&] { return expstop::mean_intensity(delta, eta, cap_m); });
}

double expstop_entropy_cost(double delta, double eta, double cap_m) {
    return nan_on_error([&] { return expstop::entropy_cost(delta, eta, cap_m); });
}

double expstop_stage_probability(double mean_lambda, double dt) {
    return nan_on_error([&] { return expstop::stage_probability(mean_lambda, dt); });
}

double expstop_gibbs_pdf(double lambda, double delta, double eta, double cap_m) {
    return nan_on_error([&] { return expstop::gibbs_pdf(lambda, expstop::GibbsPolicy{delta, eta, cap_m}); });
}

double expstop_payoff(const expstop_config* config, double p, double b) {
    if (!config) return NAN;
    return nan_on_error([&] { return expstop::payoff_g(config->value.model, p, b); });
}

expstop_status expstop_ou_moments(const expstop_config* config, double p0, double t, double* mean,
                                  double* variance) {
    if (!config || !mean || !variance) return fail(EXPSTOP_CONFIG, "null argument");
    return guarded([&] {
        const auto m = expstop::ou_moments(config->value.model, p0, t);
        *mean = m.mean;
        *variance = m.variance;
    });
}

}  // extern "C"
