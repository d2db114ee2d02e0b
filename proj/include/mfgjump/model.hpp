#pragma once

// Parametric jump kernel, running/terminal payoffs, the one-player generator
// and its adjoint on a one-dimensional lattice.
//
// Kernel: total intensity lambda(u) = base_rate + control_gain * u, and a
// destination density that is a Gaussian centred at
// (1 - mean_pull) * x + mean_pull * mean(mu) with width jump_sigma, truncated
// to the box and renormalized under trapezoidal quadrature.
//
// Payoff: J(x, mu, u) = u (a - b x) - (c_u / 2) u^2 - beta (x - mean(mu))^2,
//         V_T(x, mu)  = -beta_T (x - mean(mu))^2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfgjump/measures.hpp"
#include "mfgjump/rng.hpp"

namespace mfgjump {

using Lattice1 = Lattice<1>;
using Measure1 = GridMeasure<1>;
using Curve1 = MeasureCurve<1>;

struct JumpKernelSpec {
    double base_rate = 1.0;     // lambda_0, 1/time
    double control_gain = 0.0;  // lambda_1, 1/time per control unit
    double mean_pull = 0.0;     // kappa in [0, 1]
    double jump_sigma = 0.1;    // state units
};

struct CostSpec {
    double reward_slope = 0.0;       // a
    double reward_state_gain = 1.0;  // b
    double control_curvature = 1.0;  // c_u > 0
    double congestion_weight = 0.0;  // beta
    double terminal_weight = 0.0;    // beta_T
};

struct ControlSet {
    double u_min = 0.0;
    double u_max = 1.0;
    std::size_t resolution = 101;

    bool contains(double u, double tol = 1e-12) const { return u >= u_min - tol && u <= u_max + tol; }
    double clamp(double u) const { return std::clamp(u, u_min, u_max); }

    std::vector<double> grid() const {
        std::vector<double> g(resolution);
        for (std::size_t i = 0; i < resolution; ++i) {
            g[i] = u_min + (u_max - u_min) * static_cast<double>(i) / static_cast<double>(resolution - 1);
        }
        return g;
    }
};

/// Lattice plus kernel, payoff and control set: everything that defines the
/// one-player dynamics and preferences.
struct GameModel {
    Lattice1 lattice;
    JumpKernelSpec kernel;
    CostSpec cost;
    ControlSet controls;

    double intensity(double u) const { return kernel.base_rate + kernel.control_gain * u; }

    /// Uniform bound on the total jump intensity over U.
    double max_intensity() const { return std::max(intensity(controls.u_min), intensity(controls.u_max)); }

    /// Throws std::invalid_argument naming the first offending field.
    void validate() const {
        auto fail = [](const std::string& field, const std::string& why) {
            throw std::invalid_argument(field + ": " + why);
        };
        if (!(controls.u_min < controls.u_max)) fail("control.u_min", "must be < control.u_max");
        if (controls.resolution < 2) fail("control.resolution", "must be >= 2");
        if (!(kernel.base_rate >= 0.0)) fail("kernel.base_rate", "must be >= 0");
        if (!(kernel.control_gain >= 0.0) || !std::isfinite(kernel.control_gain)) {
            fail("kernel.control_gain", "must be finite and >= 0");
        }
        if (!(intensity(controls.u_min) >= 0.0 && intensity(controls.u_max) >= 0.0)) {
            fail("control.u_min", "jump intensity base_rate + control_gain * u must be >= 0 on the control set");
        }
        if (!(kernel.mean_pull >= 0.0 && kernel.mean_pull <= 1.0)) fail("kernel.mean_pull", "must lie in [0, 1]");
        if (!(kernel.jump_sigma > 0.0)) fail("kernel.jump_sigma", "must be > 0");
        if (!(cost.control_curvature > 0.0)) fail("cost.control_curvature", "must be > 0 (strict concavity in u)");
        if (!(cost.congestion_weight >= 0.0)) fail("cost.congestion_weight", "must be >= 0");
        if (!(cost.terminal_weight >= 0.0)) fail("cost.terminal_weight", "must be >= 0");
        if (!std::isfinite(cost.reward_slope) || !std::isfinite(cost.reward_state_gain)) {
            fail("cost.reward_slope", "must be finite");
        }
    }
};

inline double running_cost(const CostSpec& c, double x, double mean, double u) {
    const double d = x - mean;
    return u * (c.reward_slope - c.reward_state_gain * x) - 0.5 * c.control_curvature * u * u -
           c.congestion_weight * d * d;
}

inline double terminal_cost(const CostSpec& c, double x, double mean) {
    const double d = x - mean;
    return -c.terminal_weight * d * d;
}

/// Feedback law gamma(t, x) stored per (time, node); piecewise constant in
/// time with the value at t_k used on [t_k, t_{k+1}).
class FeedbackControl {
public:
    FeedbackControl(std::vector<double> times, std::size_t nodes, std::vector<double> values)
        : times_(std::move(times)), nodes_(nodes), values_(std::move(values)) {
        if (times_.empty()) throw std::invalid_argument("feedback control: empty time grid");
        if (values_.size() != times_.size() * nodes_) {
            throw std::invalid_argument("feedback control: value count != times * nodes");
        }
        for (std::size_t k = 1; k < times_.size(); ++k) {
            if (!(times_[k] > times_[k - 1])) {
                throw std::invalid_argument("feedback control: times must be strictly increasing");
            }
        }
    }

    static FeedbackControl constant(std::vector<double> times, std::size_t nodes, double u) {
        const std::size_t n = times.size() * nodes;
        return FeedbackControl(std::move(times), nodes, std::vector<double>(n, u));
    }

    const std::vector<double>& times() const { return times_; }
    std::size_t nodes() const { return nodes_; }
    const std::vector<double>& values() const { return values_; }

    /// Index k of the interval [t_k, t_{k+1}) containing t (clamped).
    std::size_t interval_at(double t) const {
        if (times_.size() == 1) return 0;
        const double eps = 1e-12 * std::max(1.0, std::abs(times_.back()));
        auto it = std::upper_bound(times_.begin(), times_.end(), t + eps);
        std::size_t k = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
        return std::min(k, times_.size() - 2);
    }

    double at(std::size_t k, std::size_t node) const { return values_[k * nodes_ + node]; }
    double operator()(double t, std::size_t node) const { return at(interval_at(t), node); }

    std::span<const double> slice(std::size_t k) const {
        return std::span<const double>(values_).subspan(k * nodes_, nodes_);
    }
    std::span<const double> slice_at(double t) const { return slice(interval_at(t)); }

    /// gamma + delta, clamped to U.
    FeedbackControl shifted(double delta, const ControlSet& U) const {
        std::vector<double> v(values_);
        for (auto& x : v) x = U.clamp(x + delta);
        return FeedbackControl(times_, nodes_, std::move(v));
    }

    void validate(const ControlSet& U) const {
        for (double u : values_) {
            if (!U.contains(u)) throw std::invalid_argument("feedback control: value outside the control set");
        }
    }

private:
    std::vector<double> times_;
    std::size_t nodes_;
    std::vector<double> values_;
};

inline std::vector<double> uniform_times(double horizon, std::size_t steps) {
    std::vector<double> t(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        t[k] = k == steps ? horizon : horizon * static_cast<double>(k) / static_cast<double>(steps);
    }
    return t;
}

/// Total jump intensity lambda(u) = integral of nu(t, x, mu, u, dy).
inline double intensity(const GameModel& model, double u) {
    if (!model.controls.contains(u)) throw std::invalid_argument("intensity: control outside U");
    return model.intensity(u);
}

/// Centre of the destination Gaussian for a jump from x.
inline double destination_centre(const JumpKernelSpec& k, double x, double mean) {
    return (1.0 - k.mean_pull) * x + k.mean_pull * mean;
}

/// Destination density on the lattice, normalized so that its trapezoidal
/// integral is exactly 1.
inline GridFunction jump_density(const GameModel& model, double x, double mean) {
    const auto& lat = model.lattice;
    const double c = destination_centre(model.kernel, x, mean);
    const double inv2s2 = 1.0 / (2.0 * model.kernel.jump_sigma * model.kernel.jump_sigma);
    GridFunction p(lat.size());
    double emin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double d = lat.coord(j)[0] - c;
        p[j] = d * d * inv2s2;
        emin = std::min(emin, p[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        p[j] = std::exp(-(p[j] - emin));
        z += p[j] * lat.cell_weight(j);
    }
    for (auto& v : p) v /= z;
    return p;
}

/// Overload matching the kernel signature nu(t, x, mu, u, dy) / lambda.
inline GridFunction jump_density(const GameModel& model, double /*t*/, double x, const Measure1& m, double u) {
    if (!model.controls.contains(u)) throw std::invalid_argument("jump_density: control outside U");
    if (!(total_mass(m) > 0.0)) throw std::invalid_argument("jump_density: measure has zero mass");
    return jump_density(model, x, mean_position(m));
}

/// Probability of landing on each node: density times cell weight.
inline std::vector<double> destination_probabilities(const GameModel& model, double x, double mean) {
    auto p = jump_density(model, x, mean);
    for (std::size_t j = 0; j < p.size(); ++j) p[j] *= model.lattice.cell_weight(j);
    return p;
}

/// Rates and destination distributions for every source node under fixed
/// per-node controls and a fixed population mean.
struct JumpOperator {
    std::size_t n = 0;
    std::vector<double> rate;         // lambda(gamma(x_i))
    std::vector<double> destination;  // row i: landing probabilities from node i

    double dest(std::size_t i, std::size_t j) const { return destination[i * n + j]; }
};

inline JumpOperator assemble_jump_operator(const GameModel& model, double mean, std::span<const double> controls) {
    const std::size_t n = model.lattice.size();
    if (controls.size() != n) throw std::invalid_argument("jump operator: control slice size mismatch");
    JumpOperator op;
    op.n = n;
    op.rate.resize(n);
    op.destination.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        op.rate[i] = model.intensity(controls[i]);
        auto q = destination_probabilities(model, model.lattice.coord(i)[0], mean);
        std::copy(q.begin(), q.end(), op.destination.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
    return op;
}

/// Mean position of a (possibly slightly signed) weight vector.
inline double weighted_mean(const Lattice1& lat, std::span<const double> w) {
    double mass = 0.0;
    double first = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        mass += w[i];
        first += w[i] * lat.coord(i)[0];
    }
    if (!(std::abs(mass) > 0.0)) throw std::invalid_argument("weighted_mean: zero mass");
    return first / mass;
}

/// (A f)(x_i) = lambda_i * (sum_j q_ij f_j - f_i).
inline GridFunction generator_action(const JumpOperator& op, std::span<const double> f) {
    GridFunction out(op.n);
    for (std::size_t i = 0; i < op.n; ++i) {
        double ef = 0.0;
        for (std::size_t j = 0; j < op.n; ++j) ef += op.dest(i, j) * f[j];
        out[i] = op.rate[i] * (ef - f[i]);
    }
    return out;
}

/// (A* mu)_j = sum_i lambda_i q_ij mu_i - lambda_j mu_j, as signed node masses.
inline GridFunction adjoint_action(const JumpOperator& op, std::span<const double> mu) {
    GridFunction out(op.n, 0.0);
    for (std::size_t i = 0; i < op.n; ++i) {
        const double flow = op.rate[i] * mu[i];
        if (flow == 0.0) continue;
        for (std::size_t j = 0; j < op.n; ++j) out[j] += flow * op.dest(i, j);
        out[i] -= flow;
    }
    return out;
}

inline GridFunction apply_generator(const GameModel& model, double t, const Measure1& m, const FeedbackControl& gamma,
                                    const GridFunction& f) {
    if (f.size() != model.lattice.size()) throw std::invalid_argument("apply_generator: function size mismatch");
    for (double v : f) {
        if (!std::isfinite(v)) throw std::invalid_argument("apply_generator: function must be finite");
    }
    const auto op = assemble_jump_operator(model, mean_position(m), gamma.slice_at(t));
    return generator_action(op, f);
}

inline GridFunction apply_adjoint(const GameModel& model, double t, const Measure1& m, const FeedbackControl& gamma) {
    const auto op = assemble_jump_operator(model, mean_position(m), gamma.slice_at(t));
    return adjoint_action(op, m.weights());
}

/// Sampled regularity constants of the kernel and payoff.
struct HypothesisReport {
    double lambda_max = 0.0;
    double max_sampled_intensity = 0.0;
    double min_sampled_intensity = 0.0;
    double lipschitz_x = 0.0;   // TV(nu(x) - nu(x')) / |x - x'|
    double lipschitz_mu = 0.0;  // TV(nu(mu) - nu(eta)) / TV(mu - eta)
    double lipschitz_u = 0.0;   // TV(nu(u) - nu(u')) / |u - u'|
    double curvature_uu = 0.0;  // mean second difference of J in u
    double curvature_uu_spread = 0.0;
    bool bounded = false;
    bool concave = false;

    /// Envelope rate for the kinetic sensitivity to initial data.
    double gronwall_constant() const { return 2.0 * lambda_max + lipschitz_mu; }
    bool passed() const {
        return bounded && concave && std::isfinite(lipschitz_x) && std::isfinite(lipschitz_mu) &&
               std::isfinite(lipschitz_u);
    }
};

inline HypothesisReport hypothesis_probe(const GameModel& model, std::size_t samples, std::uint64_t seed) {
    if (samples < 100) throw std::invalid_argument("hypothesis_probe: need at least 100 samples");
    model.validate();
    const auto& lat = model.lattice;
    const double lo = lat.lower()[0];
    const double hi = lat.upper()[0];
    const double width = hi - lo;
    const std::size_t n = lat.size();
    CounterRng rng(seed, StreamTag::probe);
    auto draw = [&](double a, double b) { return a + (b - a) * rng.uniform(); };
    auto kernel_tv = [&](double x1, double m1, double u1, double x2, double m2, double u2) {
        const auto q1 = destination_probabilities(model, x1, m1);
        const auto q2 = destination_probabilities(model, x2, m2);
        const double l1 = model.intensity(u1);
        const double l2 = model.intensity(u2);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += std::abs(l1 * q1[j] - l2 * q2[j]);
        return s;
    };

    HypothesisReport r;
    r.lambda_max = model.max_intensity();
    r.min_sampled_intensity = std::numeric_limits<double>::infinity();
    const double h = 1e-5 * width;
    const double hu = 1e-5 * (model.controls.u_max - model.controls.u_min);
    double curv_sum = 0.0;
    double curv_min = std::numeric_limits<double>::infinity();
    double curv_max = -std::numeric_limits<double>::infinity();

    std::vector<double> mu(n);
    std::vector<double> eta(n);
    for (std::size_t s = 0; s < samples; ++s) {
        const double x = draw(lo, hi - h);
        const double m = draw(lo, hi);
        const double u = draw(model.controls.u_min, model.controls.u_max);
        const double lam = model.intensity(u);
        r.max_sampled_intensity = std::max(r.max_sampled_intensity, lam);
        r.min_sampled_intensity = std::min(r.min_sampled_intensity, lam);

        r.lipschitz_x = std::max(r.lipschitz_x, kernel_tv(x, m, u, x + h, m, u) / h);

        const double u2 = u + hu <= model.controls.u_max ? u + hu : u - hu;
        r.lipschitz_u = std::max(r.lipschitz_u, kernel_tv(x, m, u, x, m, u2) / hu);

        // Random probability measure and a transfer of mass between two nodes.
        double z = 0.0;
        for (auto& w : mu) z += (w = rng.uniform());
        for (auto& w : mu) w /= z;
        const auto a = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
        auto b = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
        if (b == a) b = (a + n / 2) % n;
        const double eps = 0.5 * mu[a];
        eta = mu;
        eta[a] -= eps;
        eta[b] += eps;
        const double tv = 2.0 * eps;
        if (tv > 0.0) {
            const double m1 = weighted_mean(lat, mu);
            const double m2 = weighted_mean(lat, eta);
            r.lipschitz_mu = std::max(r.lipschitz_mu, kernel_tv(x, m1, u, x, m2, u) / tv);
        }

        const double hc = 1e-3 * (model.controls.u_max - model.controls.u_min);
        const double uc = std::clamp(u, model.controls.u_min + hc, model.controls.u_max - hc);
        const double curv = (running_cost(model.cost, x, m, uc + hc) - 2.0 * running_cost(model.cost, x, m, uc) +
                             running_cost(model.cost, x, m, uc - hc)) /
                            (hc * hc);
        curv_sum += curv;
        curv_min = std::min(curv_min, curv);
        curv_max = std::max(curv_max, curv);
    }
    r.curvature_uu = curv_sum / static_cast<double>(samples);
    r.curvature_uu_spread = curv_max - curv_min;
    r.bounded = r.max_sampled_intensity <= r.lambda_max * (1.0 + 1e-12) && r.min_sampled_intensity >= 0.0;
    r.concave = curv_max < 0.0;
    return r;
}

}  // namespace mfgjump
