#pragma once

// Exact simulation of the N-player jump system by uniformization, of a
// player facing a frozen population curve, and of a tagged deviator.
// Players live on lattice nodes; running payoffs are integrated exactly
// between events.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mfgjump/measures.hpp"
#include "mfgjump/model.hpp"
#include "mfgjump/parallel.hpp"
#include "mfgjump/rng.hpp"

namespace mfgjump {

enum class InitialSampling { iid, stratified };

struct SimConfig {
    std::size_t N = 1;
    std::size_t reps = 1;
    std::uint64_t seed = 0;
    double record_dt = 0.0;  // 0: record only t = 0 and t = T
    InitialSampling sampling = InitialSampling::iid;
    bool log_jump_times = false;  // accepted jump times of player 0
    std::size_t workers = 1;

    void validate() const {
        if (N < 1) throw std::invalid_argument("sim.N: must be >= 1");
        if (reps < 1) throw std::invalid_argument("sim.reps: must be >= 1");
        if (!(record_dt >= 0.0)) throw std::invalid_argument("sim.record_dt: must be >= 0");
    }
};

struct PathRecord {
    std::size_t rep = 0;
    std::vector<double> times;
    std::vector<std::vector<double>> states;  // per snapshot, per player
    std::vector<double> running;              // per player
    std::vector<double> payoff;               // running + terminal, per player
    std::vector<std::size_t> jumps;           // accepted jumps per player
    std::vector<double> jump_times;           // player 0, if logged

    EmpiricalMeasure<1> empirical(std::size_t k) const {
        EmpiricalMeasure<1> e;
        e.points.reserve(states[k].size());
        for (double x : states[k]) e.points.push_back({x});
        return e;
    }
    double tagged_state(std::size_t k) const { return states[k][0]; }
    const std::vector<double>& terminal_states() const { return states.back(); }
};

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
};

/// Sample mean and standard error.
inline Estimate mean_and_se(const std::vector<double>& v) {
    if (v.size() < 2) throw std::invalid_argument("mean_and_se: need at least 2 samples");
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    const double var = ss / static_cast<double>(v.size() - 1);
    return {m, std::sqrt(var / static_cast<double>(v.size()))};
}

inline Estimate payoff_estimate(const std::vector<PathRecord>& records, std::size_t player = 0) {
    std::vector<double> p;
    p.reserve(records.size());
    for (const auto& r : records) {
        if (player >= r.payoff.size()) throw std::invalid_argument("payoff_estimate: no payoff recorded for player");
        p.push_back(r.payoff[player]);
    }
    return mean_and_se(p);
}

inline void write_paths_csv(std::ostream& os, const std::vector<PathRecord>& records) {
    os.precision(17);
    os << "rep,time,player,state\n";
    for (const auto& r : records) {
        for (std::size_t k = 0; k < r.times.size(); ++k) {
            for (std::size_t i = 0; i < r.states[k].size(); ++i) {
                os << r.rep << ',' << r.times[k] << ',' << i << ',' << r.states[k][i] << '\n';
            }
        }
    }
}

inline void write_payoffs_csv(std::ostream& os, const std::vector<PathRecord>& records, std::size_t player = 0) {
    os.precision(17);
    os << "rep,payoff\n";
    for (const auto& r : records) os << r.rep << ',' << r.payoff.at(player) << '\n';
}

/// Node index for a uniform draw u in (0, 1) under the node masses w.
inline std::size_t inverse_cdf(std::span<const double> w, double u) {
    double total = 0.0;
    for (double x : w) total += x;
    const double target = u * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        acc += w[i];
        if (target < acc) return i;
    }
    for (std::size_t i = w.size(); i-- > 0;) {
        if (w[i] > 0.0) return i;
    }
    return w.size() - 1;
}

/// N starting nodes drawn from mu0: independent draws, or one draw per
/// stratum [i/N, (i+1)/N).
inline std::vector<std::size_t> sample_initial_nodes(const Measure1& mu0, std::size_t N, CounterRng& rng,
                                                     InitialSampling sampling) {
    std::vector<std::size_t> nodes(N);
    const auto& w = mu0.weights();
    for (std::size_t i = 0; i < N; ++i) {
        const double u = rng.uniform();
        const double v = sampling == InitialSampling::iid ? u : (static_cast<double>(i) + u) / static_cast<double>(N);
        nodes[i] = inverse_cdf(w, v);
    }
    return nodes;
}

namespace detail {

/// Exact time integral of the control part u (a - b x) - (c_u / 2) u^2 of the
/// running payoff under a piecewise-constant feedback.
class PolicyTable {
public:
    PolicyTable(const GameModel& model, const FeedbackControl& policy, double horizon) : policy_(&policy) {
        const std::size_t n = model.lattice.size();
        if (policy.nodes() != n) throw std::invalid_argument("simulation: policy lattice mismatch");
        const auto& t = policy.times();
        if (t.front() > 1e-12 || (t.size() > 1 && t.back() < horizon - 1e-9) || (t.size() == 1 && horizon > 0.0)) {
            throw std::invalid_argument("simulation: policy time grid must cover [0, T]");
        }
        policy.validate(model.controls);
        const std::size_t K = std::max<std::size_t>(t.size(), 2) - 1;
        rate_.assign(K * n, 0.0);
        cum_.assign((K + 1) * n, 0.0);
        const auto& c = model.cost;
        for (std::size_t k = 0; k < K; ++k) {
            const double dt = t.size() > 1 ? t[k + 1] - t[k] : 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double u = policy.at(k, i);
                const double x = model.lattice.coord(i)[0];
                rate_[k * n + i] = u * (c.reward_slope - c.reward_state_gain * x) - 0.5 * c.control_curvature * u * u;
                cum_[(k + 1) * n + i] = cum_[k * n + i] + dt * rate_[k * n + i];
            }
        }
        n_ = n;
    }

    double control(double t, std::size_t node) const { return (*policy_)(t, node); }

    double cumulative(double t, std::size_t node) const {
        const std::size_t k = policy_->interval_at(t);
        return cum_[k * n_ + node] + (t - policy_->times()[k]) * rate_[k * n_ + node];
    }

private:
    const FeedbackControl* policy_;
    std::vector<double> rate_;
    std::vector<double> cum_;
    std::size_t n_ = 0;
};

/// Mean of a frozen curve, linear in time between snapshots, with exact
/// running integrals of m and m^2.
class CurveMean {
public:
    explicit CurveMean(const Curve1& curve) : t_(curve.times) {
        m_.reserve(t_.size());
        for (const auto& s : curve.snapshots) m_.push_back(mean_position(s));
        i1_.assign(t_.size(), 0.0);
        i2_.assign(t_.size(), 0.0);
        for (std::size_t k = 0; k + 1 < t_.size(); ++k) {
            const double d = t_[k + 1] - t_[k];
            i1_[k + 1] = i1_[k] + partial1(k, d);
            i2_[k + 1] = i2_[k] + partial2(k, d);
        }
    }

    double mean(double t) const {
        const auto [k, tau] = locate(t);
        return k + 1 < t_.size() ? m_[k] + slope(k) * tau : m_[k];
    }
    double integral1(double t) const {
        const auto [k, tau] = locate(t);
        return i1_[k] + (k + 1 < t_.size() ? partial1(k, tau) : m_[k] * tau);
    }
    double integral2(double t) const {
        const auto [k, tau] = locate(t);
        return i2_[k] + (k + 1 < t_.size() ? partial2(k, tau) : m_[k] * m_[k] * tau);
    }

private:
    std::pair<std::size_t, double> locate(double t) const {
        if (t_.size() == 1) return {0, t - t_[0]};
        auto it = std::upper_bound(t_.begin(), t_.end(), t);
        std::size_t k = it == t_.begin() ? 0 : static_cast<std::size_t>(it - t_.begin()) - 1;
        k = std::min(k, t_.size() - 2);
        return {k, t - t_[k]};
    }
    double slope(std::size_t k) const { return (m_[k + 1] - m_[k]) / (t_[k + 1] - t_[k]); }
    double partial1(std::size_t k, double tau) const { return m_[k] * tau + 0.5 * slope(k) * tau * tau; }
    double partial2(std::size_t k, double tau) const {
        const double s = slope(k);
        return m_[k] * m_[k] * tau + m_[k] * s * tau * tau + s * s * tau * tau * tau / 3.0;
    }

    std::vector<double> t_;
    std::vector<double> m_;
    std::vector<double> i1_;
    std::vector<double> i2_;
};

struct ReplicaSpec {
    const GameModel* model = nullptr;
    const PolicyTable* policy = nullptr;
    const PolicyTable* tagged = nullptr;  // player 0; defaults to policy
    const CurveMean* curve = nullptr;     // external population; null couples to the empirical mean
    double horizon = 1.0;
    std::uint64_t seed = 0;
    double record_dt = 0.0;
    bool log_jump_times = false;
    bool record_states = true;
};

inline std::vector<double> snapshot_times(double horizon, double record_dt) {
    std::vector<double> s{0.0};
    if (horizon <= 0.0) return s;
    if (record_dt > 0.0) {
        const auto steps = static_cast<std::size_t>(std::ceil(horizon / record_dt - 1e-9));
        for (std::size_t k = 1; k < steps; ++k) s.push_back(static_cast<double>(k) * record_dt);
    }
    s.push_back(horizon);
    return s;
}

/// One replica of the jump system from the given starting nodes.
inline PathRecord run_replica(const ReplicaSpec& spec, std::size_t rep, const std::vector<std::size_t>& start) {
    const GameModel& model = *spec.model;
    const auto& lat = model.lattice;
    const auto& cost = model.cost;
    const std::size_t N = start.size();
    const double T = spec.horizon;
    const double lmax = model.max_intensity();
    auto policy_of = [&](std::size_t i) -> const PolicyTable& {
        return i == 0 && spec.tagged ? *spec.tagged : *spec.policy;
    };

    std::vector<std::size_t> node(start);
    std::vector<double> pos(N);
    double sum = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        pos[i] = lat.coord(node[i])[0];
        sum += pos[i];
    }

    // population mean and its running integrals
    double m_t = 0.0;
    double m1 = 0.0;
    double m2 = 0.0;
    auto mean_at = [&](double t) { return spec.curve ? spec.curve->mean(t) : sum / static_cast<double>(N); };
    auto advance = [&](double t) {
        if (spec.curve) return;
        const double m = sum / static_cast<double>(N);
        m1 += m * (t - m_t);
        m2 += m * m * (t - m_t);
        m_t = t;
    };
    auto int1 = [&](double t) { return spec.curve ? spec.curve->integral1(t) : m1; };
    auto int2 = [&](double t) { return spec.curve ? spec.curve->integral2(t) : m2; };

    PathRecord rec;
    rec.rep = rep;
    rec.running.assign(N, 0.0);
    rec.payoff.assign(N, 0.0);
    rec.jumps.assign(N, 0);
    std::vector<double> a_t(N, 0.0);
    std::vector<double> a_cu(N);
    std::vector<double> a_1(N, int1(0.0));
    std::vector<double> a_2(N, int2(0.0));
    for (std::size_t i = 0; i < N; ++i) a_cu[i] = policy_of(i).cumulative(0.0, node[i]);

    // caller must call advance(t) first when coupled to the empirical mean
    auto settle = [&](std::size_t i, double t) {
        const double x = pos[i];
        const double cu = policy_of(i).cumulative(t, node[i]);
        const double i1 = int1(t);
        const double i2 = int2(t);
        rec.running[i] += (cu - a_cu[i]) -
                          cost.congestion_weight * (x * x * (t - a_t[i]) - 2.0 * x * (i1 - a_1[i]) + (i2 - a_2[i]));
        a_t[i] = t;
        a_cu[i] = cu;
        a_1[i] = i1;
        a_2[i] = i2;
    };

    const auto snaps = snapshot_times(T, spec.record_dt);
    std::size_t next_snap = 0;
    auto record_until = [&](double t, bool inclusive) {
        while (next_snap < snaps.size() && (snaps[next_snap] < t || (inclusive && snaps[next_snap] <= t))) {
            if (spec.record_states || next_snap == 0 || next_snap + 1 == snaps.size()) {
                rec.times.push_back(snaps[next_snap]);
                rec.states.push_back(pos);
            }
            ++next_snap;
        }
    };

    CounterRng sys(spec.seed, StreamTag::system, {rep});
    std::vector<CounterRng> player;
    player.reserve(N);
    for (std::size_t i = 0; i < N; ++i) player.emplace_back(spec.seed, StreamTag::player, std::initializer_list<std::uint64_t>{rep, i});

    if (lmax > 0.0) {
        const double total_rate = static_cast<double>(N) * lmax;
        double t = 0.0;
        for (;;) {
            t += sys.exponential(total_rate);
            if (t >= T) break;
            const auto j = std::min(N - 1, static_cast<std::size_t>(sys.uniform() * static_cast<double>(N)));
            const double u = policy_of(j).control(t, node[j]);
            const double ua = player[j].uniform();
            const double ud = player[j].uniform();
            if (ua * lmax >= model.intensity(u)) continue;
            record_until(t, false);
            advance(t);
            settle(j, t);
            const auto q = destination_probabilities(model, pos[j], mean_at(t));
            const std::size_t dest = inverse_cdf(q, ud);
            sum += lat.coord(dest)[0] - pos[j];
            node[j] = dest;
            pos[j] = lat.coord(dest)[0];
            ++rec.jumps[j];
            if (j == 0 && spec.log_jump_times) rec.jump_times.push_back(t);
        }
    }
    record_until(T, true);
    advance(T);
    const double mean_T = mean_at(T);
    for (std::size_t i = 0; i < N; ++i) {
        settle(i, T);
        rec.payoff[i] = rec.running[i] + terminal_cost(cost, pos[i], mean_T);
    }
    return rec;
}

inline std::vector<PathRecord> run_replicas(const ReplicaSpec& spec, const SimConfig& cfg,
                                            const std::function<std::vector<std::size_t>(std::size_t)>& start) {
    std::vector<PathRecord> out(cfg.reps);
    parallel_for(cfg.reps, cfg.workers, [&](std::size_t r) { out[r] = run_replica(spec, r, start(r)); });
    return out;
}

inline ReplicaSpec make_spec(const GameModel& model, const PolicyTable& policy, const SimConfig& cfg, double horizon) {
    ReplicaSpec s;
    s.model = &model;
    s.policy = &policy;
    s.horizon = horizon;
    s.seed = cfg.seed;
    s.record_dt = cfg.record_dt;
    s.log_jump_times = cfg.log_jump_times;
    return s;
}

}  // namespace detail

/// N players coupled through their empirical mean, all using gamma.
inline std::vector<PathRecord> simulate_nplayer(const GameModel& model, const FeedbackControl& gamma,
                                                const SimConfig& cfg, double horizon, const Measure1& mu0) {
    cfg.validate();
    require_same_lattice(mu0.lattice() == model.lattice, "simulate_nplayer");
    const detail::PolicyTable table(model, gamma, horizon);
    const auto spec = detail::make_spec(model, table, cfg, horizon);
    return detail::run_replicas(spec, cfg, [&](std::size_t r) {
        CounterRng init(cfg.seed, StreamTag::initial, {r});
        return sample_initial_nodes(mu0, cfg.N, init, cfg.sampling);
    });
}

/// As simulate_nplayer, from explicit starting nodes (same for every replica).
inline std::vector<PathRecord> simulate_nplayer_from(const GameModel& model, const FeedbackControl& gamma,
                                                     const SimConfig& cfg, double horizon,
                                                     const std::vector<std::size_t>& start) {
    cfg.validate();
    if (start.size() != cfg.N) throw std::invalid_argument("simulate_nplayer_from: need N starting nodes");
    const detail::PolicyTable table(model, gamma, horizon);
    const auto spec = detail::make_spec(model, table, cfg, horizon);
    return detail::run_replicas(spec, cfg, [&](std::size_t) { return start; });
}

/// Independent players facing the frozen population curve. All start at x0
/// when given, otherwise they are drawn from the curve's first snapshot.
inline std::vector<PathRecord> simulate_limit_player(const GameModel& model, const Curve1& curve,
                                                     const FeedbackControl& gamma, const SimConfig& cfg,
                                                     double horizon, std::optional<double> x0 = std::nullopt) {
    cfg.validate();
    require_same_lattice(curve.lattice() == model.lattice, "simulate_limit_player");
    if (curve.times.back() < horizon - 1e-9) throw std::invalid_argument("simulate_limit_player: curve shorter than T");
    const detail::PolicyTable table(model, gamma, horizon);
    const detail::CurveMean cm(curve);
    auto spec = detail::make_spec(model, table, cfg, horizon);
    spec.curve = &cm;
    std::optional<std::size_t> x0_node;
    if (x0) {
        if (!model.lattice.contains({*x0})) throw std::out_of_range("simulate_limit_player: x0 outside the box");
        x0_node = model.lattice.nearest_node({*x0});
    }
    return detail::run_replicas(spec, cfg, [&](std::size_t r) {
        if (x0_node) return std::vector<std::size_t>(cfg.N, *x0_node);
        CounterRng init(cfg.seed, StreamTag::initial, {r});
        return sample_initial_nodes(curve.snapshots.front(), cfg.N, init, cfg.sampling);
    });
}

/// Player 0 starts at x0 and plays gamma_tilde; the others start from mu0
/// and play gamma.
inline std::vector<PathRecord> simulate_tagged(const GameModel& model, const FeedbackControl& gamma,
                                               const FeedbackControl& gamma_tilde, const SimConfig& cfg,
                                               double horizon, const Measure1& mu0, double x0) {
    cfg.validate();
    require_same_lattice(mu0.lattice() == model.lattice, "simulate_tagged");
    if (!model.lattice.contains({x0})) throw std::out_of_range("simulate_tagged: x0 outside the box");
    const std::size_t x0_node = model.lattice.nearest_node({x0});
    const detail::PolicyTable table(model, gamma, horizon);
    const detail::PolicyTable tagged(model, gamma_tilde, horizon);
    auto spec = detail::make_spec(model, table, cfg, horizon);
    spec.tagged = &tagged;
    return detail::run_replicas(spec, cfg, [&](std::size_t r) {
        CounterRng init(cfg.seed, StreamTag::initial, {r});
        auto others = sample_initial_nodes(mu0, cfg.N - 1, init, cfg.sampling);
        std::vector<std::size_t> start{x0_node};
        start.insert(start.end(), others.begin(), others.end());
        return start;
    });
}

}  // namespace mfgjump
