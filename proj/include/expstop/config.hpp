#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "expstop/hjb.hpp"
#include "expstop/mc.hpp"
#include "expstop/model.hpp"
#include "expstop/rl.hpp"

namespace expstop {

/// Malformed document, unknown key, unreadable file.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Well-formed document whose values violate a model or grid constraint.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct McSection {
    std::size_t n_paths = 100000;
    double dt = 0.01;
    double t_max = 200.0;
    std::uint64_t seed = 20240601;
    RewardRule rule = RewardRule::left_riemann;          ///< equivalence estimators
    RewardRule rollout_rule = RewardRule::exact_step;    ///< Gibbs-policy rollout
    std::vector<double> p0 = {-1.0, 0.0, 1.0};
    std::vector<std::pair<double, double>> controls = {{0.1, 0.1}, {0.5, 0.5}, {2.0, 0.2}};
    std::size_t n_trajectories = 10;                     ///< paths written by `simulate`
};

struct RlSection {
    double lr = 1e-3;
    double lr_final = 1e-4;
    std::size_t batch = 1024;
    std::size_t steps_per_iter = 50;
    std::size_t k_max = 200;
    std::size_t sims_per_path = 10;
    double dt = 0.1;
    std::size_t n_paths = 200;
    std::size_t n_steps = 100;
    std::uint64_t seed = 7;
    OptimizerKind optimizer = OptimizerKind::adam;
    GradientMode gradient = GradientMode::semi;
    bool stratify = true;
    std::string signal_paths;  ///< CSV (path_id, step, p); generated when empty
};

struct SweepSection {
    std::vector<double> cap_m = {1.0, 5.0, 50.0};
    std::vector<double> eta = {1e-1, 1e-3, 1e-5};
    std::vector<double> theta = {0.05, 0.1, 0.2};
    std::vector<double> sigma = {0.1, 0.2, 0.3};
    double p0 = 0.0;
};

struct ExperimentConfig {
    ModelParams model;
    Grid grid = Grid::uniform(-4.0, 4.0, -4.0, 4.0, 0.05);
    SolverOptions solver;
    McSection mc;
    RlSection rl;
    SweepSection sweep;
    std::string output_dir = "out";
};

/// Parses a JSON document; missing keys keep their defaults. Throws ConfigError or ValidationError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Applies "dotted.key=value" overrides (value parsed as JSON, else taken as a string), then validates.
ExperimentConfig apply_overrides(const ExperimentConfig& base, const std::vector<std::string>& assignments);

std::string config_to_json(const ExperimentConfig& config);

/// Throws ValidationError listing every violated constraint.
void validate_config(const ExperimentConfig& config);

TrainConfig train_config(const ExperimentConfig& config);
RolloutConfig rollout_config(const ExperimentConfig& config, RewardRule rule);

}  // namespace expstop
