#pragma once

// Backward dynamic programming for the value W(t, x) of a single player
// facing a frozen population curve, the optimal feedback, and checks of the
// solution against the exact linear propagator.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "mfgjump/kinetic.hpp"
#include "mfgjump/model.hpp"

namespace mfgjump {

/// W and the optimal feedback on the time x node grid.
struct ValueGrid {
    std::vector<double> times;
    Lattice1 lattice;
    std::vector<double> W;  // row k: W(t_k, .)
    FeedbackControl policy;

    std::size_t nodes() const { return lattice.size(); }
    double value(std::size_t k, std::size_t node) const { return W[k * nodes() + node]; }
    std::span<const double> row(std::size_t k) const {
        return std::span<const double>(W).subspan(k * nodes(), nodes());
    }
};

inline void write_csv(std::ostream& os, const ValueGrid& vg) {
    os.precision(17);
    os << "time,node_index,W,gamma\n";
    for (std::size_t k = 0; k < vg.times.size(); ++k) {
        for (std::size_t i = 0; i < vg.nodes(); ++i) {
            os << vg.times[k] << ',' << i << ',' << vg.value(k, i) << ',' << vg.policy.at(k, i) << '\n';
        }
    }
}

struct HamiltonianMax {
    double u = 0.0;
    double theta = 0.0;
};

/// Expected jump gain D(x) = sum_y q_x(y) W(y) - W(x) for one source row.
inline double jump_gain(const JumpOperator& op, std::size_t node, std::span<const double> w) {
    double e = 0.0;
    for (std::size_t j = 0; j < op.n; ++j) e += op.dest(node, j) * w[j];
    return e - w[node];
}

/// Theta(u) = J(x, mu, u) + lambda(u) D, evaluated directly.
inline double hamiltonian(const GameModel& model, double x, double mean, double gain, double u) {
    return running_cost(model.cost, x, mean, u) + model.intensity(u) * gain;
}

/// Exact maximizer of the concave quadratic Theta over U.
inline HamiltonianMax maximize_hamiltonian(const GameModel& model, double x, double mean, double gain) {
    const auto& c = model.cost;
    if (!(c.control_curvature > 0.0)) {
        throw std::invalid_argument("maximize_hamiltonian: control_curvature must be > 0");
    }
    const double slope = c.reward_slope - c.reward_state_gain * x + model.kernel.control_gain * gain;
    const double u = model.controls.clamp(slope / c.control_curvature);
    return {u, hamiltonian(model, x, mean, gain, u)};
}

/// Node form: W_t is the value at the next time level, m the population.
inline HamiltonianMax maximize_hamiltonian(const GameModel& model, std::size_t node, const Measure1& m,
                                           std::span<const double> w_next) {
    for (double v : w_next) {
        if (!std::isfinite(v)) throw std::invalid_argument("maximize_hamiltonian: W must be finite");
    }
    const double mean = mean_position(m);
    const double x = model.lattice.coord(node)[0];
    const auto q = destination_probabilities(model, x, mean);
    double e = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) e += q[j] * w_next[j];
    return maximize_hamiltonian(model, x, mean, e - w_next[node]);
}

/// Theta on the control grid with its discrete argmax and curvature there.
struct HamiltonianReport {
    std::vector<double> controls;
    std::vector<double> theta;
    std::size_t argmax = 0;
    double curvature = 0.0;
};

inline HamiltonianReport hamiltonian_report(const GameModel& model, std::size_t node, const Measure1& m,
                                            std::span<const double> w_next) {
    const double mean = mean_position(m);
    const double x = model.lattice.coord(node)[0];
    const auto q = destination_probabilities(model, x, mean);
    double e = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) e += q[j] * w_next[j];
    const double gain = e - w_next[node];
    HamiltonianReport r;
    r.controls = model.controls.grid();
    r.theta.resize(r.controls.size());
    for (std::size_t i = 0; i < r.controls.size(); ++i) r.theta[i] = hamiltonian(model, x, mean, gain, r.controls[i]);
    r.argmax = static_cast<std::size_t>(std::max_element(r.theta.begin(), r.theta.end()) - r.theta.begin());
    const std::size_t c = std::clamp<std::size_t>(r.argmax, 1, r.controls.size() - 2);
    const double h = r.controls[1] - r.controls[0];
    r.curvature = (r.theta[c + 1] - 2.0 * r.theta[c] + r.theta[c - 1]) / (h * h);
    return r;
}

/// Backward explicit sweep W_k = W_{k+1} + dt * Theta*, with the population
/// frozen at mu_{t_k} on each interval.
inline ValueGrid solve_hjb(const GameModel& model, const Curve1& curve) {
    model.validate();
    require_same_lattice(curve.lattice() == model.lattice, "solve_hjb");
    const std::size_t n = model.lattice.size();
    const std::size_t K = curve.size();
    std::vector<double> W(K * n);
    std::vector<double> gamma(K * n);
    const double mean_T = mean_position(curve.snapshots.back());
    for (std::size_t i = 0; i < n; ++i) W[(K - 1) * n + i] = terminal_cost(model.cost, model.lattice.coord(i)[0], mean_T);

    std::vector<double> zero_controls(n, model.controls.u_min);
    for (std::size_t kk = K; kk-- > 0;) {
        // Row K-1 keeps the terminal value; its control is the maximizer against it.
        const std::size_t src = kk + 1 < K ? kk + 1 : kk;
        const double mean = mean_position(curve.snapshots[kk]);
        const auto op = assemble_jump_operator(model, mean, zero_controls);
        const double dt = kk + 1 < K ? curve.times[kk + 1] - curve.times[kk] : 0.0;
        if (kk + 1 < K) check_stability(model, dt, "solve_hjb");
        const std::span<const double> w_next(W.data() + src * n, n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto best = maximize_hamiltonian(model, model.lattice.coord(i)[0], mean, jump_gain(op, i, w_next));
            gamma[kk * n + i] = best.u;
            if (kk + 1 < K) {
                const double w = w_next[i] + dt * best.theta;
                if (!std::isfinite(w)) throw std::runtime_error("solve_hjb: non-finite value");
                W[kk * n + i] = w;
            }
        }
    }
    return ValueGrid{curve.times, model.lattice, std::move(W), FeedbackControl(curve.times, n, std::move(gamma))};
}

namespace detail {

inline Eigen::MatrixXd generator_matrix(const JumpOperator& op) {
    const auto n = static_cast<Eigen::Index>(op.n);
    Eigen::MatrixXd G(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            G(i, j) = op.rate[static_cast<std::size_t>(i)] * op.dest(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
        G(i, i) -= op.rate[static_cast<std::size_t>(i)];
    }
    return G;
}

}  // namespace detail

/// Rebuilds W from the terminal cost and the running payoff under the frozen
/// feedback with the exact per-interval propagator, and returns the largest
/// deviation from the stored values.
inline double duhamel_residual(const GameModel& model, const ValueGrid& vg, const Curve1& curve) {
    const std::size_t n = model.lattice.size();
    const std::size_t K = curve.size();
    if (vg.times.size() != K) throw std::invalid_argument("duhamel_residual: time grids differ");
    const auto N = static_cast<Eigen::Index>(n);
    Eigen::VectorXd w(N);
    for (std::size_t i = 0; i < n; ++i) w(static_cast<Eigen::Index>(i)) = vg.value(K - 1, i);
    double worst = 0.0;
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(N + 1, N + 1);
    for (std::size_t k = K - 1; k-- > 0;) {
        const double dt = curve.times[k + 1] - curve.times[k];
        const double mean = mean_position(curve.snapshots[k]);
        const auto u = vg.policy.slice(k);
        const auto op = assemble_jump_operator(model, mean, u);
        aug.setZero();
        aug.topLeftCorner(N, N) = detail::generator_matrix(op) * dt;
        for (std::size_t i = 0; i < n; ++i) {
            aug(static_cast<Eigen::Index>(i), N) = dt * running_cost(model.cost, model.lattice.coord(i)[0], mean, u[i]);
        }
        const Eigen::MatrixXd E = aug.exp();
        w = E.topLeftCorner(N, N) * w + E.topRightCorner(N, 1);
        for (std::size_t i = 0; i < n; ++i) {
            worst = std::max(worst, std::abs(w(static_cast<Eigen::Index>(i)) - vg.value(k, i)));
        }
    }
    return worst;
}

struct FeedbackRegularity {
    double lipschitz_x = 0.0;       // max_t discrete Lipschitz constant of x -> gamma(t, x)
    double control_deviation = 0.0;  // sup |gamma1 - gamma2|
    double value_deviation = 0.0;    // sup |W1 - W2|
    double curve_distance = 0.0;     // sup_t TV(mu1_t, mu2_t)
    double control_ratio = 0.0;
    double value_ratio = 0.0;
};

inline double feedback_lipschitz_x(const ValueGrid& vg) {
    double L = 0.0;
    const double h = vg.lattice.spacing(0);
    for (std::size_t k = 0; k + 1 < vg.times.size(); ++k) {
        for (std::size_t i = 0; i + 1 < vg.nodes(); ++i) {
            L = std::max(L, std::abs(vg.policy.at(k, i + 1) - vg.policy.at(k, i)) / h);
        }
    }
    return L;
}

inline FeedbackRegularity feedback_regularity_probe(const ValueGrid& vg) {
    return FeedbackRegularity{feedback_lipschitz_x(vg)};
}

/// Two solutions against two curves: sup deviations of control and value
/// divided by the sup-TV distance of the curves.
inline FeedbackRegularity feedback_regularity_probe(const ValueGrid& a, const Curve1& ca, const ValueGrid& b,
                                                    const Curve1& cb) {
    if (a.times.size() != b.times.size() || a.nodes() != b.nodes()) {
        throw std::invalid_argument("feedback_regularity_probe: grids differ");
    }
    FeedbackRegularity r;
    r.lipschitz_x = std::max(feedback_lipschitz_x(a), feedback_lipschitz_x(b));
    for (std::size_t k = 0; k + 1 < a.times.size(); ++k) {
        for (std::size_t i = 0; i < a.nodes(); ++i) {
            r.control_deviation = std::max(r.control_deviation, std::abs(a.policy.at(k, i) - b.policy.at(k, i)));
        }
    }
    for (std::size_t q = 0; q < a.W.size(); ++q) r.value_deviation = std::max(r.value_deviation, std::abs(a.W[q] - b.W[q]));
    r.curve_distance = sup_tv_distance(ca, cb);
    if (r.curve_distance > 0.0) {
        r.control_ratio = r.control_deviation / r.curve_distance;
        r.value_ratio = r.value_deviation / r.curve_distance;
    }
    return r;
}

}  // namespace mfgjump
