#pragma once

// Mean-field consistency: damped Picard iteration of the map that sends a
// population curve to the flow induced by the best response against it.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "mfgjump/hjb.hpp"
#include "mfgjump/kinetic.hpp"
#include "mfgjump/model.hpp"

namespace mfgjump {

struct FixedPointConfig {
    double damping = 0.5;
    std::size_t max_iters = 50;
    double tol = 1e-6;

    void validate() const {
        if (!(damping > 0.0 && damping <= 1.0)) throw std::invalid_argument("fixed_point.damping: must lie in (0, 1]");
        if (!(tol > 0.0)) throw std::invalid_argument("fixed_point.tol: must be > 0");
        if (max_iters < 1) throw std::invalid_argument("fixed_point.max_iters: must be >= 1");
    }
};

/// Everything needed to pose and solve one game instance.
struct Scenario {
    GameModel model;
    Measure1 initial;
    double horizon = 1.0;
    KineticSolveConfig kinetic;
    FixedPointConfig fixed_point;

    std::vector<double> times() const { return uniform_times(horizon, kinetic.t_steps); }

    void validate() const {
        model.validate();
        kinetic.validate();
        fixed_point.validate();
        if (!(horizon > 0.0)) throw std::invalid_argument("time.horizon: must be > 0");
        require_same_lattice(initial.lattice() == model.lattice, "scenario initial measure");
        if (std::abs(total_mass(initial) - 1.0) > 1e-9) throw std::invalid_argument("initial: mass must be 1");
        check_stability(model, horizon / static_cast<double>(kinetic.t_steps), "time.steps");
    }
};

/// The curve that stays at mu_0 for all times.
inline Curve1 frozen_curve(const Scenario& s) {
    const auto t = s.times();
    return Curve1(t, std::vector<Measure1>(t.size(), s.initial));
}

struct BestResponse {
    ValueGrid value;
    Curve1 curve;
};

inline BestResponse best_response_detail(const Curve1& curve, const Scenario& s) {
    if (tv_distance(curve.snapshots.front(), s.initial) > 1e-12) {
        throw std::invalid_argument("best_response: curve must start at the scenario initial measure");
    }
    auto vg = solve_hjb(s.model, curve);
    auto next = solve_kinetic(s.model, s.initial, vg.policy, s.kinetic, s.horizon);
    return {std::move(vg), std::move(next)};
}

inline Curve1 best_response(const Curve1& curve, const Scenario& s) {
    return best_response_detail(curve, s).curve;
}

struct IterationLog {
    std::size_t iter = 0;
    double residual = 0.0;
    double theta = 0.0;
};

struct EquilibriumSolution {
    Curve1 curve;
    ValueGrid value;
    double residual = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<IterationLog> history;

    const FeedbackControl& policy() const { return value.policy; }
};

inline void write_csv(std::ostream& os, const std::vector<IterationLog>& history) {
    os.precision(17);
    os << "iter,residual,theta\n";
    for (const auto& h : history) os << h.iter << ',' << h.residual << ',' << h.theta << '\n';
}

inline Curve1 mix(const Curve1& a, const Curve1& b, double theta) {
    std::vector<Measure1> s;
    s.reserve(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) s.push_back(mix(a.snapshots[k], b.snapshots[k], theta));
    return Curve1(a.times, std::move(s));
}

/// Iterates c <- (1 - theta) c + theta T(c) from the frozen curve. The
/// residual of an iterate is sup_t TV(T(c), c); the returned curve is the
/// iterate with the smallest residual together with its best response.
inline EquilibriumSolution solve_equilibrium(const Scenario& s, const FixedPointConfig& cfg) {
    s.validate();
    cfg.validate();
    double theta = cfg.damping;
    Curve1 c = frozen_curve(s);
    std::optional<BestResponse> kept;
    Curve1 kept_curve;
    double kept_residual = std::numeric_limits<double>::infinity();
    std::size_t kept_iter = 0;
    std::vector<IterationLog> history;
    bool converged = false;
    double prev = std::numeric_limits<double>::infinity();
    int increases = 0;
    for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
        auto br = best_response_detail(c, s);
        const double r = sup_tv_distance(br.curve, c);
        history.push_back({it, r, theta});
        const bool done = r <= cfg.tol;
        Curve1 next = done ? Curve1{} : mix(c, br.curve, theta);
        if (r < kept_residual) {
            kept_residual = r;
            kept_curve = c;
            kept_iter = it;
            kept = std::move(br);
        }
        if (done) {
            converged = true;
            break;
        }
        if (r > prev && ++increases >= 2) {
            theta *= 0.5;
            increases = 0;
        }
        prev = r;
        c = std::move(next);
    }
    return EquilibriumSolution{std::move(kept_curve), std::move(kept->value), kept_residual,
                               converged ? kept_iter : history.size(), converged, std::move(history)};
}

inline EquilibriumSolution solve_equilibrium(const Scenario& s) { return solve_equilibrium(s, s.fixed_point); }

}  // namespace mfgjump
