#include "expstop/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace expstop {

using nlohmann::json;

namespace {

const char* rule_name(RewardRule r) { return r == RewardRule::exact_step ? "exact_step" : "left_riemann"; }

RewardRule parse_rule(const std::string& s) {
    if (s == "left_riemann") return RewardRule::left_riemann;
    if (s == "exact_step") return RewardRule::exact_step;
    throw ConfigError("unknown reward rule '" + s + "' (left_riemann | exact_step)");
}

json to_json(const ExperimentConfig& c) {
    const ModelParams& m = c.model;
    json controls = json::array();
    for (const auto& [a, b] : c.mc.controls) controls.push_back({a, b});
    return {
        {"model",
         {{"theta", m.theta}, {"pbar", m.pbar}, {"sigma", m.sigma}, {"rho", m.rho}, {"gamma", m.gamma},
          {"iota", m.iota}, {"psi", m.psi}, {"ref_r", m.ref_r}, {"varpi", m.varpi}, {"k_loss", m.k_loss},
          {"cap_m", m.cap_m}, {"eta", m.eta}}},
        {"grid",
         {{"p_min", c.grid.p_min}, {"p_max", c.grid.p_max}, {"b_min", c.grid.b_min}, {"b_max", c.grid.b_max},
          {"h", c.grid.h}, {"h_b", nullptr}}},
        {"solver",
         {{"tol", c.solver.tol}, {"max_iter", c.solver.max_iter}, {"damping", c.solver.damping},
          {"neumann_order", static_cast<int>(c.solver.neumann)}}},
        {"mc",
         {{"n_paths", c.mc.n_paths}, {"dt", c.mc.dt}, {"t_max", c.mc.t_max}, {"seed", c.mc.seed},
          {"reward_rule", rule_name(c.mc.rule)}, {"rollout_rule", rule_name(c.mc.rollout_rule)},
          {"p0", c.mc.p0}, {"controls", controls}, {"n_trajectories", c.mc.n_trajectories}}},
        {"rl",
         {{"lr", c.rl.lr}, {"lr_final", c.rl.lr_final}, {"batch", c.rl.batch},
          {"steps_per_iter", c.rl.steps_per_iter}, {"K_max", c.rl.k_max}, {"I", c.rl.sims_per_path},
          {"dt", c.rl.dt}, {"n_paths", c.rl.n_paths}, {"n_steps", c.rl.n_steps}, {"seed", c.rl.seed},
          {"optimizer", c.rl.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
          {"gradient", c.rl.gradient == GradientMode::semi ? "semi" : "full"}, {"stratify", c.rl.stratify},
          {"signal_paths", c.rl.signal_paths}}},
        {"sweep",
         {{"M", c.sweep.cap_m}, {"eta", c.sweep.eta}, {"theta", c.sweep.theta}, {"sigma", c.sweep.sigma},
          {"p0", c.sweep.p0}}},
        {"output_dir", c.output_dir},
    };
}

// Copies `patch` into `base`, refusing keys the schema does not have.
void merge(json& base, const json& patch, const std::string& where) {
    if (!patch.is_object()) throw ConfigError(where.empty() ? "config must be a JSON object" : where + " must be an object");
    for (const auto& [key, value] : patch.items()) {
        const std::string path = where.empty() ? key : where + "." + key;
        if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
        if (base[key].is_object()) {
            merge(base[key], value, path);
        } else {
            base[key] = value;
        }
    }
}

template <class T>
T get(const json& j, const char* key, const std::string& section) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + section + "." + key + "' has the wrong type");
    }
}

std::size_t get_count(const json& j, const char* key, const std::string& section) {
    const json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError("config key '" + section + "." + key + "' must be a nonnegative integer");
    }
    return v.get<std::size_t>();
}

ExperimentConfig from_json(const json& j) {
    ExperimentConfig c;
    const json& m = j.at("model");
    c.model.theta = get<double>(m, "theta", "model");
    c.model.pbar = get<double>(m, "pbar", "model");
    c.model.sigma = get<double>(m, "sigma", "model");
    c.model.rho = get<double>(m, "rho", "model");
    c.model.gamma = get<double>(m, "gamma", "model");
    c.model.iota = get<double>(m, "iota", "model");
    c.model.psi = get<double>(m, "psi", "model");
    c.model.ref_r = get<double>(m, "ref_r", "model");
    c.model.varpi = get<double>(m, "varpi", "model");
    c.model.k_loss = get<double>(m, "k_loss", "model");
    c.model.cap_m = get<double>(m, "cap_m", "model");
    c.model.eta = get<double>(m, "eta", "model");

    const json& g = j.at("grid");
    const double h = get<double>(g, "h", "grid");
    if (!g.at("h_b").is_null() && get<double>(g, "h_b", "grid") != h) {
        throw ValidationError("grid: p step and b step differ; the coupled system needs identical node sets");
    }
    try {
        c.grid = Grid::uniform(get<double>(g, "p_min", "grid"), get<double>(g, "p_max", "grid"),
                               get<double>(g, "b_min", "grid"), get<double>(g, "b_max", "grid"), h);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }

    const json& s = j.at("solver");
    c.solver.tol = get<double>(s, "tol", "solver");
    c.solver.max_iter = get<int>(s, "max_iter", "solver");
    c.solver.damping = get<double>(s, "damping", "solver");
    const int order = get<int>(s, "neumann_order", "solver");
    if (order != 1 && order != 2) throw ValidationError("solver.neumann_order must be 1 or 2");
    c.solver.neumann = order == 1 ? NeumannOrder::first : NeumannOrder::second;

    const json& mc = j.at("mc");
    c.mc.n_paths = get_count(mc, "n_paths", "mc");
    c.mc.dt = get<double>(mc, "dt", "mc");
    c.mc.t_max = get<double>(mc, "t_max", "mc");
    c.mc.seed = get<std::uint64_t>(mc, "seed", "mc");
    c.mc.rule = parse_rule(get<std::string>(mc, "reward_rule", "mc"));
    c.mc.rollout_rule = parse_rule(get<std::string>(mc, "rollout_rule", "mc"));
    c.mc.p0 = get<std::vector<double>>(mc, "p0", "mc");
    c.mc.controls.clear();
    for (const auto& pair : mc.at("controls")) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
            throw ConfigError("mc.controls entries must be [alpha, beta] pairs");
        }
        c.mc.controls.emplace_back(pair[0].get<double>(), pair[1].get<double>());
    }
    c.mc.n_trajectories = get_count(mc, "n_trajectories", "mc");

    const json& rl = j.at("rl");
    c.rl.lr = get<double>(rl, "lr", "rl");
    c.rl.lr_final = get<double>(rl, "lr_final", "rl");
    c.rl.batch = get_count(rl, "batch", "rl");
    c.rl.steps_per_iter = get_count(rl, "steps_per_iter", "rl");
    c.rl.k_max = get_count(rl, "K_max", "rl");
    c.rl.sims_per_path = get_count(rl, "I", "rl");
    c.rl.dt = get<double>(rl, "dt", "rl");
    c.rl.n_paths = get_count(rl, "n_paths", "rl");
    c.rl.n_steps = get_count(rl, "n_steps", "rl");
    c.rl.seed = get<std::uint64_t>(rl, "seed", "rl");
    const auto opt = get<std::string>(rl, "optimizer", "rl");
    if (opt != "adam" && opt != "sgd") throw ConfigError("rl.optimizer must be adam or sgd");
    c.rl.optimizer = opt == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
    const auto grad = get<std::string>(rl, "gradient", "rl");
    if (grad != "semi" && grad != "full") throw ConfigError("rl.gradient must be semi or full");
    c.rl.gradient = grad == "semi" ? GradientMode::semi : GradientMode::full;
    c.rl.stratify = get<bool>(rl, "stratify", "rl");
    c.rl.signal_paths = get<std::string>(rl, "signal_paths", "rl");

    const json& sw = j.at("sweep");
    c.sweep.cap_m = get<std::vector<double>>(sw, "M", "sweep");
    c.sweep.eta = get<std::vector<double>>(sw, "eta", "sweep");
    c.sweep.theta = get<std::vector<double>>(sw, "theta", "sweep");
    c.sweep.sigma = get<std::vector<double>>(sw, "sigma", "sweep");
    c.sweep.p0 = get<double>(sw, "p0", "sweep");

    c.output_dir = get<std::string>(j, "output_dir", "");
    return c;
}

ExperimentConfig from_patched(const json& patch) {
    json doc = to_json(ExperimentConfig{});
    merge(doc, patch, "");
    auto config = from_json(doc);
    validate_config(config);
    return config;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json patch;
    try {
        patch = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return from_patched(patch);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

ExperimentConfig apply_overrides(const ExperimentConfig& base, const std::vector<std::string>& assignments) {
    json doc = to_json(base);
    for (const auto& assignment : assignments) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
        const std::string key = assignment.substr(0, eq);
        const std::string text = assignment.substr(eq + 1);
        json value;
        try {
            value = json::parse(text);
        } catch (const json::parse_error&) {
            value = text;
        }
        json patch = value;
        std::string rest = key;
        std::vector<std::string> parts;
        for (std::size_t dot; (dot = rest.find('.')) != std::string::npos; rest = rest.substr(dot + 1)) {
            parts.push_back(rest.substr(0, dot));
        }
        parts.push_back(rest);
        for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
        merge(doc, patch, "");
    }
    auto config = from_json(doc);
    validate_config(config);
    return config;
}

std::string config_to_json(const ExperimentConfig& config) { return to_json(config).dump(2); }

void validate_config(const ExperimentConfig& c) {
    std::vector<std::string> problems = validate_pairs_trading(c.model);
    auto require = [&](bool ok, const char* what) {
        if (!ok) problems.emplace_back(what);
    };
    require(c.grid.same_axes() && c.grid.p_max == c.grid.b_max, "grid: p and b node sets must coincide");
    require(c.solver.tol > 0.0, "solver.tol > 0");
    require(c.solver.max_iter >= 1, "solver.max_iter >= 1");
    require(c.solver.damping > 0.0 && c.solver.damping <= 1.0, "solver.damping in (0,1]");
    require(c.mc.n_paths >= 2, "mc.n_paths >= 2");
    require(c.mc.dt > 0.0 && std::isfinite(c.mc.dt), "mc.dt > 0");
    require(c.mc.t_max > c.mc.dt, "mc.t_max > mc.dt");
    for (const auto& [a, b] : c.mc.controls) require(a >= 0.0 && b >= 0.0, "mc.controls nonnegative");
    require(c.rl.lr >= 0.0, "rl.lr >= 0");
    require(c.rl.lr_final > 0.0 || c.rl.lr == 0.0, "rl.lr_final > 0");
    require(c.rl.dt > 0.0, "rl.dt > 0");
    require(c.rl.sims_per_path >= 1, "rl.I >= 1");
    require(c.rl.steps_per_iter >= 1, "rl.steps_per_iter >= 1");
    require(c.rl.n_paths >= 1 && c.rl.n_steps >= 1, "rl.n_paths, rl.n_steps >= 1");
    for (double m : c.sweep.cap_m) require(m > 0.0, "sweep.M > 0");
    for (double e : c.sweep.eta) require(e > 0.0, "sweep.eta > 0");
    for (double t : c.sweep.theta) require(t > 0.0, "sweep.theta > 0");
    for (double s : c.sweep.sigma) require(s > 0.0, "sweep.sigma > 0");
    require(!c.output_dir.empty(), "output_dir not empty");
    if (!problems.empty()) {
        std::string msg = "invalid config:";
        for (const auto& p : problems) msg += " " + p + ";";
        throw ValidationError(msg);
    }
}

TrainConfig train_config(const ExperimentConfig& c) {
    TrainConfig t;
    t.lr = c.rl.lr;
    t.lr_final = c.rl.lr_final;
    t.batch = c.rl.batch;
    t.stratify = c.rl.stratify;
    t.steps_per_iter = c.rl.steps_per_iter;
    t.k_max = c.rl.k_max;
    t.sims_per_path = c.rl.sims_per_path;
    t.dt = c.rl.dt;
    t.optimizer = c.rl.optimizer;
    t.mode = c.rl.gradient;
    t.b_min = c.grid.b_min;
    t.b_max = c.grid.b_max;
    t.threads = c.solver.threads;
    return t;
}

RolloutConfig rollout_config(const ExperimentConfig& c, RewardRule rule) {
    RolloutConfig r;
    r.dt = c.mc.dt;
    r.t_max = c.mc.t_max;
    r.rule = rule;
    r.threads = c.solver.threads;
    return r;
}

}  // namespace expstop
