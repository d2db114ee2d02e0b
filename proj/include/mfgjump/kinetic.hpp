#pragma once

// Forward solver for the nonlinear kinetic equation d/dt mu = A*[t, mu, gamma] mu
// and the sensitivity of its flow to the initial measure.

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "mfgjump/model.hpp"
#include "mfgjump/parallel.hpp"

namespace mfgjump {

enum class Integrator { euler, rk4 };

struct KineticSolveConfig {
    std::size_t t_steps = 200;
    Integrator integrator = Integrator::rk4;
    bool clip_negatives = true;

    void validate() const {
        if (t_steps < 10) throw std::invalid_argument("time.steps: must be >= 10");
    }
};

/// Running account of negative mass removed by clipping.
struct ClipLog {
    double step_max = 0.0;
    double total = 0.0;
};

inline constexpr double kStabilityLimit = 0.5;
inline constexpr double kClipBudget = 1e-6;

inline void check_stability(const GameModel& model, double dt, const char* who) {
    const double lmax = model.max_intensity();
    if (dt * lmax > kStabilityLimit) {
        std::ostringstream os;
        os.precision(6);
        os << who << ": dt * lambda_max = " << dt * lmax << " exceeds " << kStabilityLimit << "; need dt <= "
           << kStabilityLimit / lmax << " (dt = " << dt << ", lambda_max = " << lmax << ")";
        throw std::invalid_argument(os.str());
    }
}

namespace detail {

inline GridFunction adjoint_of_weights(const GameModel& model, std::span<const double> w,
                                       std::span<const double> controls) {
    const auto op = assemble_jump_operator(model, weighted_mean(model.lattice, w), controls);
    return adjoint_action(op, w);
}

}  // namespace detail

/// One explicit step of the kinetic equation. The control slice is the one
/// in force at time t and is held for the whole step.
inline Measure1 kinetic_step(const GameModel& model, const Measure1& m, double t, double dt,
                             const FeedbackControl& gamma, Integrator integrator = Integrator::rk4,
                             bool clip_negatives = true, ClipLog* log = nullptr) {
    if (!(dt > 0.0)) throw std::invalid_argument("kinetic_step: dt must be > 0");
    check_stability(model, dt, "kinetic_step");
    require_same_lattice(m.lattice() == model.lattice, "kinetic_step");
    if (gamma.nodes() != m.size()) throw std::invalid_argument("kinetic_step: control lattice mismatch");
    const auto u = gamma.slice_at(t);
    const std::size_t n = m.size();
    const auto& w0 = m.weights();
    std::vector<double> next(n);
    if (model.max_intensity() == 0.0) return m;

    if (integrator == Integrator::euler) {
        const auto k1 = detail::adjoint_of_weights(model, w0, u);
        for (std::size_t i = 0; i < n; ++i) next[i] = w0[i] + dt * k1[i];
    } else {
        std::vector<double> stage(n);
        const auto k1 = detail::adjoint_of_weights(model, w0, u);
        for (std::size_t i = 0; i < n; ++i) stage[i] = w0[i] + 0.5 * dt * k1[i];
        const auto k2 = detail::adjoint_of_weights(model, stage, u);
        for (std::size_t i = 0; i < n; ++i) stage[i] = w0[i] + 0.5 * dt * k2[i];
        const auto k3 = detail::adjoint_of_weights(model, stage, u);
        for (std::size_t i = 0; i < n; ++i) stage[i] = w0[i] + dt * k3[i];
        const auto k4 = detail::adjoint_of_weights(model, stage, u);
        for (std::size_t i = 0; i < n; ++i) {
            next[i] = w0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    double negative = 0.0;
    for (double v : next) {
        if (v < 0.0) negative -= v;
    }
    if (negative > 0.0) {
        if (!clip_negatives && negative > 1e-12) {
            std::ostringstream os;
            os << "kinetic_step: negative mass " << negative << " with clipping disabled; reduce dt below " << dt;
            throw std::runtime_error(os.str());
        }
        const double mass_in = total_mass(m);
        for (auto& v : next) v = std::max(v, 0.0);
        if (clip_negatives) {
            double s = 0.0;
            for (double v : next) s += v;
            for (auto& v : next) v *= mass_in / s;
        }
        if (log) {
            log->step_max = std::max(log->step_max, negative);
            log->total += negative;
        }
    }
    return Measure1(m.lattice(), std::move(next));
}

/// Full flow {mu_t} on the uniform grid with cfg.t_steps steps over [0, T].
inline Curve1 solve_kinetic(const GameModel& model, const Measure1& mu0, const FeedbackControl& gamma,
                            const KineticSolveConfig& cfg, double horizon, ClipLog* log = nullptr) {
    cfg.validate();
    if (!(horizon >= 0.0)) throw std::invalid_argument("solve_kinetic: horizon must be >= 0");
    if (std::abs(total_mass(mu0) - 1.0) > 1e-9) {
        throw std::invalid_argument("solve_kinetic: initial measure must have mass 1");
    }
    if (horizon == 0.0) return Curve1({0.0}, {mu0});
    const auto times = uniform_times(horizon, cfg.t_steps);
    std::vector<Measure1> snaps;
    snaps.reserve(times.size());
    snaps.push_back(mu0);
    ClipLog local;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        snaps.push_back(kinetic_step(model, snaps.back(), times[k], times[k + 1] - times[k], gamma, cfg.integrator,
                                     cfg.clip_negatives, &local));
        if (local.total > kClipBudget) {
            std::ostringstream os;
            os << "solve_kinetic: cumulative clipped mass " << local.total << " exceeds " << kClipBudget
               << "; use more time steps";
            throw std::runtime_error(os.str());
        }
    }
    if (log) *log = local;
    return Curve1(times, std::move(snaps));
}

/// r(t) = TV(mu_t, eta_t) / TV(mu_0, eta_0) along the two flows.
inline std::vector<double> initial_sensitivity_probe(const GameModel& model, const Measure1& mu0,
                                                     const Measure1& eta0, const FeedbackControl& gamma,
                                                     const KineticSolveConfig& cfg, double horizon,
                                                     std::size_t workers = 1) {
    const double d0 = tv_distance(mu0, eta0);
    if (!(d0 > 0.0)) throw std::invalid_argument("initial_sensitivity_probe: initial measures coincide");
    std::vector<Curve1> curves(2);
    parallel_for(2, workers, [&](std::size_t i) {
        curves[i] = solve_kinetic(model, i == 0 ? mu0 : eta0, gamma, cfg, horizon);
    });
    std::vector<double> r(curves[0].size());
    for (std::size_t k = 0; k < r.size(); ++k) {
        r[k] = tv_distance(curves[0].snapshots[k], curves[1].snapshots[k]) / d0;
    }
    return r;
}

}  // namespace mfgjump
