#include "expstop/workflows.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>

#include "expstop/io.hpp"
#include "expstop/rng.hpp"
#include "expstop/tridiag.hpp"
#include "json.hpp"

namespace expstop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

json params_json(const ModelParams& m) {
    return {{"theta", m.theta}, {"pbar", m.pbar},   {"sigma", m.sigma},   {"rho", m.rho},
            {"gamma", m.gamma}, {"iota", m.iota},   {"psi", m.psi},       {"ref_r", m.ref_r},
            {"varpi", m.varpi}, {"k_loss", m.k_loss}, {"cap_m", m.cap_m}, {"eta", m.eta}};
}

json diag_json(const SolveDiagnostics& d) {
    return {{"converged", d.converged},
            {"iterations", d.iterations},
            {"final_change", d.final_change},
            {"residual", d.residual},
            {"upwind_nodes", d.upwind_nodes}};
}

std::string hash_of(const ExperimentConfig& c) { return hex64(field_hash(c.model, c.grid, c.solver)); }

std::string csv_row(std::initializer_list<double> values) {
    std::string out;
    for (double v : values) {
        if (!out.empty()) out += ',';
        out += format_number(v);
    }
    return out + "\n";
}

CommandResult finish(Status status, json summary) {
    summary["status"] = static_cast<int>(status);
    return {status, summary.dump()};
}

CommandResult cmd_solve(const ExperimentConfig& c) {
    const auto start = Clock::now();
    bool hit = false;
    const ValueField field = cached_field(c, &hit);
    const fs::path dir = c.output_dir;
    write_field_csv(dir, field);
    json meta = {{"params", params_json(c.model)},
                 {"grid", {{"p_min", c.grid.p_min}, {"p_max", c.grid.p_max}, {"b_min", c.grid.b_min},
                           {"b_max", c.grid.b_max}, {"h", c.grid.h}, {"n_p", c.grid.n_p}, {"n_b", c.grid.n_b}}},
                 {"solver", {{"tol", c.solver.tol}, {"max_iter", c.solver.max_iter}, {"damping", c.solver.damping},
                             {"neumann_order", static_cast<int>(c.solver.neumann)}}},
                 {"v1", diag_json(field.v1_diag)},
                 {"v0", diag_json(field.v0_diag)},
                 {"hash", hash_of(c)},
                 {"cache_hit", hit},
                 {"wall_time_s", seconds_since(start)}};
    write_text(dir / "meta.json", meta.dump(2) + "\n");

    const auto entry = free_boundary_entry(advantage_entry(field.v0, field.v1_diagonal()), field.grid);
    json summary = {{"command", "solve"},
                    {"cache_hit", hit},
                    {"hash", hash_of(c)},
                    {"converged", field.converged()},
                    {"v1_iterations", field.v1_diag.iterations},
                    {"v0_iterations", field.v0_diag.iterations},
                    {"v0_at_0", field.v0_interp(0.0)},
                    {"p_dagger", entry.p_dagger ? json(*entry.p_dagger) : json(nullptr)}};
    return finish(field.converged() ? Status::ok : Status::numerical, summary);
}

CommandResult cmd_sweep(const ExperimentConfig& c) {
    const fs::path dir = c.output_dir;
    const SweepTable table = convergence_sweep(c.sweep.cap_m, c.sweep.eta, c.model, c.grid, c.solver, c.sweep.p0);
    std::string grid_csv = "M,eta,v0_at_p0,converged\n";
    bool converged = true;
    for (const auto& row : table.rows) {
        grid_csv += format_number(row.cap_m) + "," + format_number(row.eta) + "," + format_number(row.v0_at_p0) + "," +
                    (row.converged ? "1" : "0") + "\n";
        converged = converged && row.converged;
    }
    write_text(dir / "sweep_m_eta.csv", grid_csv);

    auto statics = [&](const std::vector<double>& values, double ModelParams::*member, const char* name) {
        std::string csv = std::string(name) + ",p,v0\n";
        for (double v : values) {
            ModelParams m = c.model;
            m.*member = v;
            const auto field = solve_field(m, c.grid, c.solver);
            converged = converged && field.converged();
            for (std::size_t i = 0; i < c.grid.n_p; ++i) csv += csv_row({v, c.grid.p(i), field.v0[i]});
        }
        write_text(dir / (std::string("sweep_") + name + ".csv"), csv);
    };
    statics(c.sweep.theta, &ModelParams::theta, "theta");
    statics(c.sweep.sigma, &ModelParams::sigma, "sigma");

    json by_m = json::object();
    for (double m : c.sweep.cap_m) by_m[format_number(m)] = table.monotone_in_eta(m);
    json by_eta = json::object();
    for (double e : c.sweep.eta) by_eta[format_number(e)] = table.monotone_in_m(e);
    json summary = {{"command", "sweep"},
                    {"rows", table.rows.size()},
                    {"monotone_in_eta_at_M", by_m},
                    {"monotone_in_M_at_eta", by_eta},
                    {"converged", converged}};
    return finish(converged ? Status::ok : Status::numerical, summary);
}

CommandResult cmd_validate(const ExperimentConfig& c) {
    const fs::path dir = c.output_dir;
    const std::string hash = hash_of(c);
    std::vector<ConstantIntensity> controls;
    for (const auto& [a, b] : c.mc.controls) controls.emplace_back(a, b);

    std::vector<LedgerRow> ledger;
    json equivalence = json::array();
    bool all_pass = true;
    const auto rows =
        equivalence_report(controls, c.mc.p0, c.model, c.mc.n_paths, rollout_config(c, c.mc.rule), c.mc.seed);
    for (const auto& r : rows) {
        const auto& e = r.estimate;
        equivalence.push_back({{"alpha", r.alpha},
                               {"beta", r.beta},
                               {"p0", r.p0},
                               {"instantaneous", e.instantaneous.mean},
                               {"instantaneous_se", e.instantaneous.std_error},
                               {"stopping", e.stopping.mean},
                               {"stopping_se", e.stopping.std_error},
                               {"paired_diff_se", e.diff_std_error},
                               {"tail_bound", e.instantaneous.tail_bound},
                               {"z", r.z},
                               {"pass", r.pass}});
        all_pass = all_pass && r.pass;
        const std::string id = "a" + format_number(r.alpha) + "_b" + format_number(r.beta) + "_p" + format_number(r.p0);
        ledger.push_back({"equivalence_instantaneous_" + id, hash, e.instantaneous.mean, e.instantaneous.std_error,
                          c.mc.n_paths, c.mc.dt, c.mc.seed});
        ledger.push_back({"equivalence_stopping_" + id, hash, e.stopping.mean, e.stopping.std_error, c.mc.n_paths,
                          c.mc.dt, c.mc.seed});
    }

    const ValueField field = cached_field(c);
    json rollouts = json::array();
    for (double p0 : c.mc.p0) {
        const auto r = rollout_value_entropy(field, p0, c.mc.n_paths, rollout_config(c, c.mc.rollout_rule), c.mc.seed);
        const double v0 = field.v0_interp(p0);
        const double allowed = 3.0 * r.value.std_error + 0.5 * c.mc.dt;
        const bool pass = std::abs(r.value.mean - v0) <= allowed;
        all_pass = all_pass && pass;
        rollouts.push_back({{"p0", p0},
                            {"estimate", r.value.mean},
                            {"std_error", r.value.std_error},
                            {"reward_only", r.reward_only},
                            {"entropy_penalty", r.entropy_penalty},
                            {"solver_v0", v0},
                            {"allowed", allowed},
                            {"pass", pass}});
        ledger.push_back({"rollout_p" + format_number(p0), hash, r.value.mean, r.value.std_error, c.mc.n_paths,
                          c.mc.dt, c.mc.seed});
    }

    const json report = {{"equivalence", equivalence}, {"rollout", rollouts}, {"pass", all_pass}};
    write_text(dir / "validate.json", report.dump(2) + "\n");
    upsert_ledger(dir / "results.csv", ledger);
    json summary = {{"command", "validate"}, {"pass", all_pass}, {"checks", rows.size() + c.mc.p0.size()}};
    return finish(all_pass ? Status::ok : Status::validation, summary);
}

SignalPaths training_paths(const ExperimentConfig& c, bool* generated) {
    if (!c.rl.signal_paths.empty()) {
        *generated = false;
        return read_signal_paths(c.rl.signal_paths, c.rl.dt);
    }
    *generated = true;
    return generate_signal_paths(c.model, c.rl.n_paths, c.rl.n_steps, c.rl.dt, c.grid.p_min, c.grid.p_max,
                                 c.rl.seed);
}

// Analytic vs finite-difference gradient on ten transitions from random nets.
GradientCheck pretraining_gradient_check(const ExperimentConfig& c, const SignalPaths& paths) {
    std::mt19937_64 engine(derive_seed(c.rl.seed, 0x6C6B, Stream::init));
    const ValueNet v0 = ValueNet::random(1, engine);
    const ValueNet v1 = ValueNet::random(2, engine);
    const NetPolicy policy(v0, v1, c.model);
    AugmentConfig aug;
    aug.dt = paths.dt;
    aug.sims_per_path = 2;
    aug.b_min = c.grid.b_min;
    aug.b_max = c.grid.b_max;
    SignalPaths few;
    few.dt = paths.dt;
    few.p.assign(paths.p.begin(), paths.p.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(5, paths.p.size())));
    const auto data = augment_paths(few, policy, c.model, aug, c.rl.seed);
    std::vector<Transition> batch;
    const std::size_t stride = std::max<std::size_t>(1, data.size() / 10);
    for (std::size_t k = 0; k < data.size() && batch.size() < 10; k += stride) batch.push_back(data[k]);
    return check_td_gradient(batch, v0, v1, c.model, c.rl.gradient);
}

CommandResult cmd_train(const ExperimentConfig& c) {
    const auto start = Clock::now();
    const fs::path dir = c.output_dir;
    bool generated = false;
    const SignalPaths paths = training_paths(c, &generated);
    if (generated) write_signal_paths(dir / "signal_paths.csv", paths);

    const GradientCheck check = pretraining_gradient_check(c, paths);
    if (!(check.max_rel_error < 1e-4)) {
        json summary = {{"command", "train"},
                        {"error", "gradient check failed"},
                        {"gradient_check_rel_error", check.max_rel_error}};
        return finish(Status::numerical, summary);
    }

    const TrainResult result = train(paths, c.model, train_config(c), c.rl.seed);
    // output_dir is left out so checkpoints do not depend on where they were written
    auto embedded = json::parse(config_to_json(c));
    embedded.erase("output_dir");
    const std::string config_json = embedded.dump(2);
    write_text(dir / "v0_net.json", net_to_json(result.v0, config_json, c.rl.seed) + "\n");
    write_text(dir / "v1_net.json", net_to_json(result.v1, config_json, c.rl.seed) + "\n");
    std::string history = "iteration,loss\n";
    for (std::size_t k = 0; k < result.loss_history.size(); ++k) {
        history += std::to_string(k) + "," + format_number(result.loss_history[k]) + "\n";
    }
    write_text(dir / "loss_history.csv", history);

    const double first = result.loss_history.empty() ? 0.0 : result.loss_history.front();
    const double last = result.loss_history.empty() ? 0.0 : result.loss_history.back();
    const json meta = {{"iterations", result.iterations},
                       {"gradient_check_rel_error", check.max_rel_error},
                       {"initial_loss", first},
                       {"final_loss", last},
                       {"signal_paths_generated", generated},
                       {"wall_time_s", seconds_since(start)}};
    write_text(dir / "train_meta.json", meta.dump(2) + "\n");
    json summary = {{"command", "train"},
                    {"iterations", result.iterations},
                    {"initial_loss", first},
                    {"final_loss", last},
                    {"gradient_check_rel_error", check.max_rel_error}};
    return finish(Status::ok, summary);
}

CommandResult cmd_compare(const ExperimentConfig& c) {
    const fs::path dir = c.output_dir;
    if (!fs::exists(dir / "v0_net.json") || !fs::exists(dir / "v1_net.json")) {
        throw IoError("compare needs v0_net.json and v1_net.json in " + dir.string() + " (run train first)");
    }
    const ValueNet v0 = net_from_json(read_text(dir / "v0_net.json"));
    const ValueNet v1 = net_from_json(read_text(dir / "v1_net.json"));
    if (v0.input_dim() != 1 || v1.input_dim() != 2) throw IoError("checkpoint input dimensions do not match");
    const ValueField field = cached_field(c);
    const BenchmarkMetrics m = compare_to_benchmark(v0, v1, field);

    std::string surface = "p,b,error\n";
    for (const auto& s : m.v1_surface) surface += csv_row({s.p, s.b, s.error});
    write_text(dir / "error_surface.csv", surface);

    const bool rmse_ok = m.rmse_v0 <= 0.1 * m.v0_range;
    const bool band_ok = m.band_mean_v1 >= m.outside_mean_v1;
    const json metrics = {{"rmse_v0", m.rmse_v0},
                          {"max_abs_v0", m.max_v0},
                          {"rmse_v1", m.rmse_v1},
                          {"max_abs_v1", m.max_v1},
                          {"v0_interior_range", m.v0_range},
                          {"rmse_v0_over_range", m.v0_range > 0.0 ? m.rmse_v0 / m.v0_range : 0.0},
                          {"band_mean_abs_error_v1", m.band_mean_v1},
                          {"outside_mean_abs_error_v1", m.outside_mean_v1},
                          {"band_nodes", m.band_nodes},
                          {"outside_nodes", m.outside_nodes},
                          {"rmse_within_10pct", rmse_ok},
                          {"error_concentrates_at_boundary", band_ok}};
    write_text(dir / "metrics.json", metrics.dump(2) + "\n");
    json summary = metrics;
    summary["command"] = "compare";
    return finish(Status::ok, summary);
}

CommandResult cmd_simulate(const ExperimentConfig& c) {
    const fs::path dir = c.output_dir;
    const ValueField field = cached_field(c);
    const FieldGibbsPolicy policy(field);
    const RolloutConfig rollout = rollout_config(c, c.mc.rollout_rule);
    std::string csv = "p0,path,step,t,p,j,b\n";
    std::string events = "p0,path,entry_time,exit_time,discounted_reward,stopping_payoff,entropy_penalty,truncated\n";
    std::size_t index = 0;
    for (double p0 : c.mc.p0) {
        for (std::size_t k = 0; k < c.mc.n_trajectories; ++k, ++index) {
            const Trajectory t = simulate_augmented(policy, c.model, p0, rollout, SeedPack{c.mc.seed, index});
            for (std::size_t l = 0; l < t.states.size(); ++l) {
                const auto& s = t.states[l];
                csv += format_number(p0) + "," + std::to_string(k) + "," + std::to_string(l) + "," +
                       format_number(static_cast<double>(l) * t.dt) + "," + format_number(s.p) + "," +
                       std::to_string(static_cast<int>(s.j)) + "," + format_number(s.b) + "\n";
            }
            events += format_number(p0) + "," + std::to_string(k) + "," +
                      (t.entry_time ? format_number(*t.entry_time) : "") + "," +
                      (t.exit_time ? format_number(*t.exit_time) : "") + "," + format_number(t.discounted_reward) +
                      "," + format_number(t.stopping_payoff) + "," + format_number(t.entropy_penalty_accum) + "," +
                      (t.truncated ? "1" : "0") + "\n";
        }
    }
    write_text(dir / "trajectories.csv", csv);
    write_text(dir / "trajectory_events.csv", events);
    json summary = {{"command", "simulate"}, {"trajectories", index}};
    return finish(Status::ok, summary);
}

}  // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"solve", "sweep", "validate", "train", "compare", "simulate"};
    return names;
}

ValueField cached_field(const ExperimentConfig& c, bool* cache_hit) {
    const fs::path file = fs::path(c.output_dir) / "cache" / (hash_of(c) + ".bin");
    if (auto field = read_field_cache(file, c.model, c.grid)) {
        if (cache_hit) *cache_hit = true;
        return std::move(*field);
    }
    if (cache_hit) *cache_hit = false;
    ValueField field = solve_field(c.model, c.grid, c.solver);
    if (field.converged()) write_field_cache(file, field);
    return field;
}

CommandResult run_command(const std::string& name, const ExperimentConfig& config) {
    auto failure = [&](Status status, const std::string& message) {
        return finish(status, {{"command", name}, {"error", message}});
    };
    try {
        validate_config(config);
        if (name == "solve") return cmd_solve(config);
        if (name == "sweep") return cmd_sweep(config);
        if (name == "validate") return cmd_validate(config);
        if (name == "train") return cmd_train(config);
        if (name == "compare") return cmd_compare(config);
        if (name == "simulate") return cmd_simulate(config);
        return failure(Status::config, "unknown command '" + name + "'");
    } catch (const ValidationError& e) {
        return failure(Status::validation, e.what());
    } catch (const ConfigError& e) {
        return failure(Status::config, e.what());
    } catch (const IoError& e) {
        return failure(Status::config, e.what());
    } catch (const fs::filesystem_error& e) {
        return failure(Status::config, e.what());
    } catch (const NumericalError& e) {
        return failure(Status::numerical, e.what());
    } catch (const std::invalid_argument& e) {
        return failure(Status::validation, e.what());
    } catch (const std::domain_error& e) {
        return failure(Status::validation, e.what());
    } catch (const std::exception& e) {
        return failure(Status::numerical, e.what());
    }
}

}  // namespace expstop
