#include "expstop/rl.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "expstop/parallel.hpp"
#include "expstop/policy.hpp"
#include "expstop/rng.hpp"
#include "expstop/tridiag.hpp"

namespace expstop {

namespace {

constexpr std::size_t H = ValueNet::hidden;

std::size_t param_count(std::size_t input_dim) { return H * input_dim + H + H + 1; }

// Offsets into the flattened parameter vector.
struct Layout {
    std::size_t w1 = 0, b1, w2, b2;
    explicit Layout(std::size_t d) : b1(H * d), w2(H * d + H), b2(H * d + 2 * H) {}
};

}  // namespace

ValueNet::ValueNet(std::size_t input_dim, double input_scale)
    : input_dim_(input_dim), input_scale_(input_scale), params_(param_count(input_dim), 0.0) {
    if (input_dim != 1 && input_dim != 2) throw std::invalid_argument("ValueNet: input_dim must be 1 or 2");
    if (!(input_scale > 0.0) || !std::isfinite(input_scale)) {
        throw std::invalid_argument("ValueNet: input_scale must be positive");
    }
}

ValueNet ValueNet::random(std::size_t input_dim, std::mt19937_64& engine, double input_scale) {
    ValueNet net(input_dim, input_scale);
    const Layout at(input_dim);
    const double a1 = std::sqrt(6.0 / static_cast<double>(input_dim));
    const double a2 = std::sqrt(1.0 / static_cast<double>(H));
    std::uniform_real_distribution<double> u1(-a1, a1);
    std::uniform_real_distribution<double> u2(-a2, a2);
    for (std::size_t k = 0; k < H * input_dim; ++k) net.params_[at.w1 + k] = u1(engine);
    for (std::size_t k = 0; k < H; ++k) net.params_[at.w2 + k] = u2(engine);
    return net;
}

void ValueNet::set_parameters(std::span<const double> values) {
    if (values.size() != params_.size()) throw std::invalid_argument("ValueNet: parameter count mismatch");
    std::copy(values.begin(), values.end(), params_.begin());
}

double ValueNet::forward(std::span<const double> x) const {
    if (x.size() != input_dim_) throw std::invalid_argument("ValueNet: input size mismatch");
    const Layout at(input_dim_);
    const double* w = params_.data();
    double out = w[at.b2];
    for (std::size_t k = 0; k < H; ++k) {
        double z = w[at.b1 + k];
        for (std::size_t d = 0; d < input_dim_; ++d) z += w[at.w1 + k * input_dim_ + d] * (input_scale_ * x[d]);
        if (z > 0.0) out += w[at.w2 + k] * z;
    }
    return out;
}

double ValueNet::operator()(double p) const {
    const std::array<double, 1> x{p};
    return forward(x);
}

double ValueNet::operator()(double p, double b) const {
    const std::array<double, 2> x{p, b};
    return forward(x);
}

void ValueNet::accumulate_gradient(std::span<const double> x, double upstream, std::span<double> grad) const {
    if (x.size() != input_dim_ || grad.size() != params_.size()) {
        throw std::invalid_argument("ValueNet: gradient size mismatch");
    }
    const Layout at(input_dim_);
    const double* w = params_.data();
    grad[at.b2] += upstream;
    for (std::size_t k = 0; k < H; ++k) {
        double z = w[at.b1 + k];
        for (std::size_t d = 0; d < input_dim_; ++d) z += w[at.w1 + k * input_dim_ + d] * (input_scale_ * x[d]);
        if (z <= 0.0) continue;
        grad[at.w2 + k] += upstream * z;
        const double back = upstream * w[at.w2 + k];
        grad[at.b1 + k] += back;
        for (std::size_t d = 0; d < input_dim_; ++d) grad[at.w1 + k * input_dim_ + d] += back * input_scale_ * x[d];
    }
}

bool ValueNet::finite() const {
    return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
}

StageRate NetPolicy::entry(double p) const { return gibbs_rate(v1_(p, p) - v0_(p), params_); }

StageRate NetPolicy::exit(double p, double b) const {
    return gibbs_rate(payoff_g(params_, p, b) - v1_(p, b), params_);
}

SignalPaths generate_signal_paths(const ModelParams& params, std::size_t n_paths, std::size_t steps, double dt,
                                  double p_lo, double p_hi, std::uint64_t seed) {
    if (!(dt > 0.0) || !(p_lo <= p_hi)) throw std::invalid_argument("generate_signal_paths: bad dt or range");
    const OuTransition ou(params, dt);
    SignalPaths out;
    out.dt = dt;
    out.p.resize(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) {
        const SeedPack seeds{seed, i};
        auto init = seeds.engine(Stream::init);
        auto signal = seeds.engine(Stream::signal);
        std::uniform_real_distribution<double> start(p_lo, p_hi);
        std::normal_distribution<double> normal(0.0, 1.0);
        auto& path = out.p[i];
        path.resize(steps + 1);
        path[0] = start(init);
        for (std::size_t l = 0; l < steps; ++l) path[l + 1] = ou(path[l], normal(signal));
    }
    return out;
}

std::vector<Transition> augment_paths(const SignalPaths& paths, const IntensityPolicy& policy,
                                      const ModelParams& /*params*/, const AugmentConfig& config, std::uint64_t seed) {
    if (config.sims_per_path == 0) throw std::invalid_argument("augment_paths: sims_per_path must be positive");
    if (!(config.b_min <= config.b_max)) throw std::invalid_argument("augment_paths: b_min > b_max");
    const std::size_t sims = config.sims_per_path;
    const std::size_t tasks = paths.p.size() * sims;
    std::vector<std::vector<Transition>> chunks(tasks);

    parallel_for(
        tasks,
        [&](std::size_t task) {
            const std::size_t i = task / sims;
            const std::size_t s = task % sims;
            const auto& path = paths.p[i];
            const SeedPack seeds{seed, task};
            auto init = seeds.engine(Stream::init);
            auto coin = seeds.engine(Stream::bernoulli);
            std::uniform_real_distribution<double> unit(0.0, 1.0);

            AugmentedState state{path.empty() ? 0.0 : path[0], Regime::idle, 0.0};
            if (s >= sims / 2) {
                state.j = Regime::holding;
                state.b = std::uniform_real_distribution<double>(config.b_min, config.b_max)(init);
            }
            auto& out = chunks[task];
            out.reserve(path.size());
            for (std::size_t l = 0; l + 1 < path.size(); ++l) {
                const bool holding = state.j == Regime::holding;
                StageRate rate{0.0, 0.0};
                if (!config.suppress_switching) rate = holding ? policy.exit(state.p, state.b) : policy.entry(state.p);
                const double q = stage_probability(rate.intensity, config.dt);
                const double u = unit(coin);

                Transition t;
                t.from = state;
                t.dt = config.dt;
                t.entropy_cost = rate.entropy_cost;
                t.path = static_cast<std::uint32_t>(i);
                t.sim = static_cast<std::uint32_t>(s);
                AugmentedState next{path[l + 1], state.j, state.b};
                if (u < q) {
                    if (holding) {
                        next.j = Regime::done;
                    } else {
                        next.j = Regime::holding;
                        next.b = path[l + 1];
                    }
                }
                t.to = next;
                out.push_back(t);
                state = next;
                if (state.j == Regime::done) break;
            }
        },
        config.threads);

    std::size_t total = 0;
    for (const auto& c : chunks) total += c.size();
    std::vector<Transition> all;
    all.reserve(total);
    for (auto& c : chunks) all.insert(all.end(), c.begin(), c.end());
    return all;
}

namespace {

// Bootstrap target of a transition, with the net (if any) and input it reads.
struct Target {
    double value = 0.0;
    int net = -1;  // -1: constant, 0: v0, 1: v1
    std::array<double, 2> x{};
};

Target target_of(const Transition& t, const ValueNet& v0, const ValueNet& v1, const ModelParams& params) {
    Target out;
    switch (t.to.j) {
        case Regime::idle:
            out.net = 0;
            out.x = {t.to.p, 0.0};
            out.value = v0(t.to.p);
            break;
        case Regime::holding:
            out.net = 1;
            out.x = {t.to.p, t.to.b};
            out.value = v1(t.to.p, t.to.b);
            break;
        case Regime::done:
            out.value = payoff_g(params, t.to.p, t.from.b);
            break;
    }
    return out;
}

double current_value(const Transition& t, const ValueNet& v0, const ValueNet& v1) {
    return t.from.j == Regime::idle ? v0(t.from.p) : v1(t.from.p, t.from.b);
}

double delta_of(const Transition& t, double target, double current, const ModelParams& params) {
    return -t.entropy_cost * t.dt + std::exp(-params.rho * t.dt) * target - current;
}

}  // namespace

TdError td_error(const Transition& t, const ValueNet& v0, const ValueNet& v1, const ModelParams& params) {
    TdError e;
    if (t.from.j == Regime::done) return e;
    const double d = delta_of(t, target_of(t, v0, v1, params).value, current_value(t, v0, v1), params);
    (t.from.j == Regime::idle ? e.d0 : e.d1) = d;
    return e;
}

std::vector<TdError> td_errors(std::span<const Transition> batch, const ValueNet& v0, const ValueNet& v1,
                               const ModelParams& params) {
    std::vector<TdError> out;
    out.reserve(batch.size());
    for (const auto& t : batch) out.push_back(td_error(t, v0, v1, params));
    return out;
}

LossGradient td_loss(std::span<const Transition> data, std::span<const std::size_t> indices, const ValueNet& v0,
                     const ValueNet& v1, const ModelParams& params, GradientMode mode) {
    LossGradient out;
    out.grad_v0.assign(v0.parameter_count(), 0.0);
    out.grad_v1.assign(v1.parameter_count(), 0.0);
    const std::size_t n = indices.empty() ? data.size() : indices.size();

    std::size_t counted = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (data[indices.empty() ? k : indices[k]].from.j != Regime::done) ++counted;
    }
    if (counted == 0) return out;
    const double scale = 2.0 / static_cast<double>(counted);

    CompensatedSum loss;
    for (std::size_t k = 0; k < n; ++k) {
        const Transition& t = data[indices.empty() ? k : indices[k]];
        if (t.from.j == Regime::done) continue;
        const Target target = target_of(t, v0, v1, params);
        const bool idle = t.from.j == Regime::idle;
        const std::array<double, 2> x{t.from.p, t.from.b};
        const double d = delta_of(t, target.value, current_value(t, v0, v1), params);
        loss.add(d * d);

        const double g = scale * d;
        if (idle) {
            v0.accumulate_gradient(std::span<const double>(x.data(), 1), -g, out.grad_v0);
        } else {
            v1.accumulate_gradient(x, -g, out.grad_v1);
        }
        if (mode == GradientMode::full && target.net >= 0) {
            const double up = g * std::exp(-params.rho * t.dt);
            if (target.net == 0) {
                v0.accumulate_gradient(std::span<const double>(target.x.data(), 1), up, out.grad_v0);
            } else {
                v1.accumulate_gradient(target.x, up, out.grad_v1);
            }
        }
    }
    out.loss = loss.value() / static_cast<double>(counted);
    return out;
}

double frozen_target_loss(std::span<const Transition> data, const ValueNet& v0, const ValueNet& v1,
                          const ValueNet& target_v0, const ValueNet& target_v1, const ModelParams& params) {
    CompensatedSum loss;
    std::size_t counted = 0;
    for (const auto& t : data) {
        if (t.from.j == Regime::done) continue;
        const double d = delta_of(t, target_of(t, target_v0, target_v1, params).value, current_value(t, v0, v1), params);
        loss.add(d * d);
        ++counted;
    }
    return counted == 0 ? 0.0 : loss.value() / static_cast<double>(counted);
}

namespace {

double relative_gap(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-7});
}

}  // namespace

GradientCheck check_td_gradient(std::span<const Transition> data, const ValueNet& v0, const ValueNet& v1,
                                const ModelParams& params, GradientMode mode, double h) {
    const auto analytic = td_loss(data, {}, v0, v1, params, mode);
    GradientCheck out;
    auto probe = [&](int which) {
        ValueNet a = v0;
        ValueNet b = v1;
        ValueNet& net = which == 0 ? a : b;
        const auto& grad = which == 0 ? analytic.grad_v0 : analytic.grad_v1;
        for (std::size_t k = 0; k < net.parameter_count(); ++k) {
            const double saved = net.parameters()[k];
            auto loss_at = [&](double value) {
                net.parameters()[k] = value;
                return mode == GradientMode::full ? td_loss(data, {}, a, b, params, mode).loss
                                                  : frozen_target_loss(data, a, b, v0, v1, params);
            };
            const double fd = (loss_at(saved + h) - loss_at(saved - h)) / (2.0 * h);
            net.parameters()[k] = saved;
            out.max_rel_error = std::max(out.max_rel_error, relative_gap(grad[k], fd));
            ++out.checked;
        }
    };
    probe(0);
    probe(1);
    return out;
}

GradientCheck check_net_gradient(const ValueNet& net, std::span<const double> x, double h) {
    std::vector<double> grad(net.parameter_count(), 0.0);
    net.accumulate_gradient(x, 1.0, grad);
    ValueNet probe = net;
    GradientCheck out;
    for (std::size_t k = 0; k < grad.size(); ++k) {
        const double saved = probe.parameters()[k];
        probe.parameters()[k] = saved + h;
        const double up = probe.forward(x);
        probe.parameters()[k] = saved - h;
        const double down = probe.forward(x);
        probe.parameters()[k] = saved;
        out.max_rel_error = std::max(out.max_rel_error, relative_gap(grad[k], (up - down) / (2.0 * h)));
        ++out.checked;
    }
    return out;
}

Optimizer::Optimizer(OptimizerKind kind, double lr, std::size_t n_params, double beta1, double beta2,
                     double epsilon)
    : kind_(kind), lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("optimizer: lr must be >= 0");
    if (kind == OptimizerKind::adam) {
        m_.assign(n_params, 0.0);
        v_.assign(n_params, 0.0);
    }
}

void Optimizer::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != grad.size()) throw std::invalid_argument("optimizer: size mismatch");
    if (kind_ == OptimizerKind::sgd) {
        for (std::size_t k = 0; k < params.size(); ++k) params[k] -= lr_ * grad[k];
        return;
    }
    if (m_.size() != params.size()) throw std::invalid_argument("optimizer: size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grad[k];
        v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grad[k] * grad[k];
        params[k] -= lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + epsilon_);
    }
}

namespace {

// Offsets that keep the training streams apart from the path streams.
constexpr std::uint64_t kInitStream = 0xA11CE;
constexpr std::uint64_t kAugmentStream = 0xB0B;
constexpr std::uint64_t kBatchStream = 0xC0FFEE;

void guard(double loss, std::size_t iteration) {
    if (!std::isfinite(loss) || loss > 1e6) {
        throw NumericalError("train: loss diverged at iteration " + std::to_string(iteration));
    }
}

}  // namespace

TrainResult train(const SignalPaths& paths, const ModelParams& params, const TrainConfig& config,
                  std::uint64_t seed, const TrainObserver& observer) {
    if (paths.p.empty()) throw std::invalid_argument("train: need at least one signal path");
    if (std::abs(paths.dt - config.dt) > 1e-12 * config.dt) {
        throw std::invalid_argument("train: signal path step differs from rl dt");
    }
    if (config.steps_per_iter == 0) throw std::invalid_argument("train: steps_per_iter must be positive");

    auto init = std::mt19937_64(derive_seed(seed, kInitStream, Stream::init));
    TrainResult out;
    out.v0 = ValueNet::random(1, init);
    out.v1 = ValueNet::random(2, init);
    Optimizer opt0(config.optimizer, config.lr, out.v0.parameter_count());
    Optimizer opt1(config.optimizer, config.lr, out.v1.parameter_count());

    AugmentConfig aug;
    aug.dt = config.dt;
    aug.sims_per_path = config.sims_per_path;
    aug.b_min = config.b_min;
    aug.b_max = config.b_max;
    aug.suppress_switching = config.suppress_switching;
    aug.threads = config.threads;

    std::vector<std::size_t> batch;
    for (std::size_t k = 0; k < config.k_max; ++k) {
        const double frac = config.k_max > 1 ? static_cast<double>(k) / static_cast<double>(config.k_max - 1) : 0.0;
        const double lr = config.lr > 0.0 ? config.lr * std::pow(config.lr_final / config.lr, frac) : 0.0;
        opt0.set_lr(lr);
        opt1.set_lr(lr);
        const NetPolicy policy(out.v0, out.v1, params);
        const auto data = augment_paths(paths, policy, params, aug, derive_seed(seed, kAugmentStream + k, Stream::bernoulli));
        const double loss = td_loss(data, {}, out.v0, out.v1, params, config.mode).loss;
        guard(loss, k);
        out.loss_history.push_back(loss);
        if (data.empty()) break;

        auto sampler = std::mt19937_64(derive_seed(seed, kBatchStream + k, Stream::init));
        std::array<std::vector<std::size_t>, 2> by_regime;
        for (std::size_t t = 0; t < data.size(); ++t) {
            if (data[t].from.j != Regime::done) by_regime[data[t].from.j == Regime::idle ? 0 : 1].push_back(t);
        }
        const bool full_batch = config.batch == 0 || config.batch >= data.size();
        for (std::size_t step = 0; step < config.steps_per_iter; ++step) {
            batch.clear();
            if (!full_batch && config.stratify) {
                // half of the batch per regime; each net only sees its own regime's errors
                for (const auto& pool : by_regime) {
                    if (pool.empty()) continue;
                    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
                    for (std::size_t b = 0; b < config.batch / 2; ++b) batch.push_back(pool[pick(sampler)]);
                }
            } else if (!full_batch) {
                std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
                for (std::size_t b = 0; b < config.batch; ++b) batch.push_back(pick(sampler));
            }
            const auto g = td_loss(data, batch, out.v0, out.v1, params, config.mode);
            guard(g.loss, k);
            opt0.step(out.v0.parameters(), g.grad_v0);
            opt1.step(out.v1.parameters(), g.grad_v1);
            if (!out.v0.finite() || !out.v1.finite()) {
                throw NumericalError("train: non-finite parameters at iteration " + std::to_string(k));
            }
        }
        out.iterations = k + 1;
        if (observer) observer(k, out);
    }
    return out;
}

BenchmarkMetrics compare_fields(const std::function<double(double)>& v0,
                                const std::function<double(double, double)>& v1, const ValueField& field, double lo,
                                double hi, double band) {
    const Grid& g = field.grid;
    const auto [i0, i1] = window_indices(g.p_min, g.h, g.n_p, lo, hi);
    const auto [j0, j1] = window_indices(g.b_min, g.h, g.n_b, lo, hi);
    BenchmarkMetrics m;

    CompensatedSum sq0;
    double vmin = INFINITY;
    double vmax = -INFINITY;
    for (std::size_t i = i0; i <= i1; ++i) {
        const double e = v0(g.p(i)) - field.v0[i];
        sq0.add(e * e);
        m.max_v0 = std::max(m.max_v0, std::abs(e));
        vmin = std::min(vmin, field.v0[i]);
        vmax = std::max(vmax, field.v0[i]);
    }
    m.rmse_v0 = std::sqrt(sq0.value() / static_cast<double>(i1 - i0 + 1));
    m.v0_range = vmax - vmin;

    const auto boundary = free_boundary_exit(advantage_exit(field.v1, g, field.params), g);
    CompensatedSum sq1, in_band, outside;
    for (std::size_t i = i0; i <= i1; ++i) {
        for (std::size_t j = j0; j <= j1; ++j) {
            const double p = g.p(i);
            const double b = g.b(j);
            const double e = v1(p, b) - field.v1_at(i, j);
            sq1.add(e * e);
            m.max_v1 = std::max(m.max_v1, std::abs(e));
            m.v1_surface.push_back({p, b, e});
            const auto& star = boundary.p_star[j];
            if (star && std::abs(p - *star) <= band + 1e-12) {
                in_band.add(std::abs(e));
                ++m.band_nodes;
            } else {
                outside.add(std::abs(e));
                ++m.outside_nodes;
            }
        }
    }
    m.rmse_v1 = std::sqrt(sq1.value() / static_cast<double>(m.v1_surface.size()));
    if (m.band_nodes > 0) m.band_mean_v1 = in_band.value() / static_cast<double>(m.band_nodes);
    if (m.outside_nodes > 0) m.outside_mean_v1 = outside.value() / static_cast<double>(m.outside_nodes);
    return m;
}

BenchmarkMetrics compare_to_benchmark(const ValueNet& v0, const ValueNet& v1, const ValueField& field, double lo,
                                      double hi, double band) {
    return compare_fields([&](double p) { return v0(p); }, [&](double p, double b) { return v1(p, b); }, field, lo, hi,
                          band);
}

}  // namespace expstop
