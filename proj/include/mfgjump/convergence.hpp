#pragma once

// Finite-N error of functionals of the empirical measure, the deviation gap
// of a tagged player, and power-law fits of both against N.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mfgjump/kinetic.hpp"
#include "mfgjump/mfg.hpp"
#include "mfgjump/particle.hpp"

namespace mfgjump {

/// F(alpha(0, T, mu0)): the functional applied to the deterministic flow.
inline double koopman_value(const TestFunctional& F, const Scenario& s, const FeedbackControl& gamma,
                            const Measure1& mu0) {
    const auto curve = solve_kinetic(s.model, mu0, gamma, s.kinetic, s.horizon);
    return pair(F, curve.snapshots.back());
}

/// g(x) = x - mean(mu_T), so that the quadratic functional vanishes on the
/// limit flow and measures the spread of the empirical mean.
inline TestFunctional centered_quadratic(const Scenario& s, const FeedbackControl& gamma) {
    const auto curve = solve_kinetic(s.model, s.initial, gamma, s.kinetic, s.horizon);
    const double m = mean_position(curve.snapshots.back());
    TestFunctional F{FunctionalKind::quadratic_of_linear, GridFunction(s.model.lattice.size())};
    for (std::size_t i = 0; i < F.g.size(); ++i) F.g[i] = s.model.lattice.coord(i)[0] - m;
    return F;
}

struct GapOptions {
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    double se_ratio = 0.2;      // target se <= se_ratio * gap
    std::size_t max_reps = 0;   // 0: fixed reps, no adaptation
};

struct GapEstimate {
    double gap = 0.0;
    double se = 0.0;
    double signed_gap = 0.0;
    std::size_t reps = 0;
    bool capped = false;  // hit max_reps before reaching the se target
};

/// |E F(mu^N_T) - F(mu_T)| with stratified initial states. Replicas are
/// added in doublings until se <= se_ratio * gap or max_reps is reached.
inline GapEstimate functional_gap(const TestFunctional& F, std::size_t N, std::size_t reps, const Scenario& s,
                                  const FeedbackControl& gamma, const GapOptions& opt = {}) {
    if (N < 1 || reps < 2) throw std::invalid_argument("functional_gap: need N >= 1 and reps >= 2");
    if (F.g.size() != s.model.lattice.size()) throw std::invalid_argument("functional_gap: g size mismatch");
    const double target = koopman_value(F, s, gamma, s.initial);
    const detail::PolicyTable table(s.model, gamma, s.horizon);
    SimConfig cfg;
    cfg.N = N;
    cfg.seed = opt.seed;
    auto spec = detail::make_spec(s.model, table, cfg, s.horizon);
    spec.record_states = false;

    std::vector<double> values;
    auto extend = [&](std::size_t to) {
        const std::size_t from = values.size();
        values.resize(to);
        parallel_for(to - from, opt.workers, [&](std::size_t q) {
            const std::size_t r = from + q;
            CounterRng init(opt.seed, StreamTag::initial, {r});
            const auto start = sample_initial_nodes(s.initial, N, init, InitialSampling::stratified);
            const auto rec = detail::run_replica(spec, r, start);
            double lin = 0.0;
            for (double x : rec.terminal_states()) lin += interpolate(s.model.lattice, F.g, Point<1>{x});
            values[r] = F.apply(lin / static_cast<double>(N));
        });
    };
    extend(reps);
    GapEstimate g;
    for (;;) {
        const auto e = mean_and_se(values);
        g.signed_gap = e.mean - target;
        g.gap = std::abs(g.signed_gap);
        g.se = e.se;
        g.reps = values.size();
        if (opt.max_reps == 0 || g.se <= opt.se_ratio * g.gap) break;
        if (values.size() >= opt.max_reps) {
            g.capped = true;
            break;
        }
        extend(std::min(opt.max_reps, 2 * values.size()));
    }
    return g;
}

/// Constant controls on a 5-point grid over U and the policy shifted by
/// each of the given amounts (clamped to U).
inline std::vector<FeedbackControl> default_deviations(const FeedbackControl& policy, const ControlSet& U,
                                                       const std::vector<double>& shifts = {-0.1, 0.1}) {
    std::vector<FeedbackControl> d;
    for (int i = 0; i < 5; ++i) {
        const double u = U.u_min + (U.u_max - U.u_min) * i / 4.0;
        d.push_back(FeedbackControl::constant(policy.times(), policy.nodes(), u));
    }
    for (double s : shifts) d.push_back(policy.shifted(s, U));
    return d;
}

struct NashGapResult {
    double gap = 0.0;       // max over deviations, floored at 0
    double se = 0.0;        // se of the maximizing deviation
    double raw_gap = 0.0;   // max over deviations before flooring
    std::size_t best = 0;   // index of the maximizing deviation
    std::vector<Estimate> per_deviation;
};

/// Payoff gain of a tagged player switching from the equilibrium policy to
/// each deviation, with common random numbers across the two arms.
inline NashGapResult nash_gap(std::size_t N, std::size_t reps, const Scenario& s, const FeedbackControl& policy,
                              const std::vector<FeedbackControl>& deviations, double x0, std::uint64_t seed,
                              std::size_t workers = 1) {
    if (deviations.empty()) throw std::invalid_argument("nash_gap: empty deviation set");
    if (N < 1 || reps < 2) throw std::invalid_argument("nash_gap: need N >= 1 and reps >= 2");
    if (!s.model.lattice.contains({x0})) throw std::out_of_range("nash_gap: x0 outside the box");
    const std::size_t x0_node = s.model.lattice.nearest_node({x0});
    const detail::PolicyTable base(s.model, policy, s.horizon);
    std::vector<detail::PolicyTable> dev;
    dev.reserve(deviations.size());
    for (const auto& d : deviations) dev.emplace_back(s.model, d, s.horizon);
    SimConfig cfg;
    cfg.N = N;
    cfg.seed = seed;
    auto spec = detail::make_spec(s.model, base, cfg, s.horizon);
    spec.record_states = false;

    std::vector<std::vector<double>> diff(deviations.size(), std::vector<double>(reps));
    parallel_for(reps, workers, [&](std::size_t r) {
        CounterRng init(seed, StreamTag::initial, {r});
        auto others = sample_initial_nodes(s.initial, N - 1, init, InitialSampling::iid);
        std::vector<std::size_t> start{x0_node};
        start.insert(start.end(), others.begin(), others.end());
        auto arm = spec;
        arm.tagged = &base;
        const double ref = detail::run_replica(arm, r, start).payoff[0];
        for (std::size_t d = 0; d < dev.size(); ++d) {
            arm.tagged = &dev[d];
            diff[d][r] = detail::run_replica(arm, r, start).payoff[0] - ref;
        }
    });
    NashGapResult out;
    out.raw_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < dev.size(); ++d) {
        out.per_deviation.push_back(mean_and_se(diff[d]));
        if (out.per_deviation.back().mean > out.raw_gap) {
            out.raw_gap = out.per_deviation.back().mean;
            out.best = d;
        }
    }
    out.gap = std::max(0.0, out.raw_gap);
    out.se = out.per_deviation[out.best].se;
    return out;
}

struct RatePoint {
    double N = 0.0;
    double gap = 0.0;
    double se = 0.0;
};

struct RateFit {
    std::vector<RatePoint> points;  // points used in the fit
    std::size_t dropped = 0;        // points with non-positive gap
    double slope = 0.0;
    double intercept = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

namespace detail {

inline std::pair<double, double> weighted_line(const std::vector<double>& x, const std::vector<double>& y,
                                               const std::vector<double>& w) {
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double mx = sx / sw;
    const double my = sy / sw;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

inline double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const std::size_t j = std::min(i + 1, v.size() - 1);
    return v[i] + (pos - static_cast<double>(i)) * (v[j] - v[i]);
}

}  // namespace detail

/// Weighted least squares of log gap on log N with weights (gap / se)^2,
/// and a 95% parametric bootstrap interval for the slope that resamples
/// each gap log-normally with its relative error.
inline RateFit rate_fit(const std::vector<RatePoint>& points, std::uint64_t seed = 0, std::size_t resamples = 1000,
                        std::ostream* warn = nullptr) {
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (!(points[i].N > points[i - 1].N)) throw std::invalid_argument("rate_fit: N values must be strictly increasing");
    }
    RateFit fit;
    for (const auto& p : points) {
        if (p.gap > 0.0) {
            fit.points.push_back(p);
        } else {
            ++fit.dropped;
            if (warn) *warn << "rate_fit: dropping N=" << p.N << " with non-positive gap " << p.gap << '\n';
        }
    }
    if (fit.points.size() < 4) {
        throw std::invalid_argument("rate_fit: fewer than 4 points with positive gap (" +
                                    std::to_string(fit.points.size()) + ")");
    }
    const std::size_t n = fit.points.size();
    std::vector<double> x(n), y(n), w(n), rel(n);
    bool weighted = true;
    for (const auto& p : fit.points) weighted = weighted && p.se > 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = fit.points[i];
        x[i] = std::log(p.N);
        y[i] = std::log(p.gap);
        rel[i] = p.se / p.gap;
        w[i] = weighted ? 1.0 / (rel[i] * rel[i]) : 1.0;
    }
    std::tie(fit.slope, fit.intercept) = detail::weighted_line(x, y, w);

    CounterRng rng(seed, StreamTag::bootstrap);
    std::vector<double> slopes(resamples);
    std::vector<double> yb(n);
    for (std::size_t b = 0; b < resamples; ++b) {
        for (std::size_t i = 0; i < n; ++i) yb[i] = y[i] + rel[i] * rng.normal();
        slopes[b] = detail::weighted_line(x, yb, w).first;
    }
    if (resamples > 0) {
        fit.ci_lo = detail::quantile(slopes, 0.025);
        fit.ci_hi = detail::quantile(slopes, 0.975);
    } else {
        fit.ci_lo = fit.ci_hi = fit.slope;
    }
    return fit;
}

/// Rows of the results CSV; the fit columns are repeated on every row.
inline void write_results_csv(std::ostream& os, const std::string& experiment, const std::vector<RatePoint>& points,
                              const RateFit* fit) {
    os.precision(17);
    os << "experiment,N,gap,se,slope,ci_lo,ci_hi\n";
    for (const auto& p : points) {
        os << experiment << ',' << p.N << ',' << p.gap << ',' << p.se << ',';
        if (fit) {
            os << fit->slope << ',' << fit->ci_lo << ',' << fit->ci_hi << '\n';
        } else {
            os << "nan,nan,nan\n";
        }
    }
}

}  // namespace mfgjump
