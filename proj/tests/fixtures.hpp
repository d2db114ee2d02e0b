#pragma once

#include "mfgjump/config.hpp"
#include "mfgjump/mfg.hpp"

namespace fx {

using namespace mfgjump;

inline Lattice1 unit_lattice(std::size_t n = 101) { return Lattice1::cube(0.0, 1.0, n); }

inline GameModel default_model(std::size_t n = 101) {
    return GameModel{unit_lattice(n), {1.0, 2.0, 0.5, 0.1}, {0.6, 1.0, 1.0, 1.0, 1.0}, {0.0, 1.0, 101}};
}

/// Same model with a population-independent kernel and payoff.
inline GameModel decoupled_model(std::size_t n = 101) {
    auto m = default_model(n);
    m.kernel.mean_pull = 0.0;
    m.cost.congestion_weight = 0.0;
    m.cost.terminal_weight = 0.0;
    return m;
}

inline Scenario scenario_from(const GameModel& m, std::size_t steps = 200) {
    return Scenario{m, discretized_gaussian(m.lattice, 0.3, 0.1), 1.0, KineticSolveConfig{steps, Integrator::rk4, true},
                    FixedPointConfig{}};
}

inline Measure1 random_measure(const Lattice1& lat, std::uint64_t seed) {
    CounterRng rng(seed, StreamTag::test);
    std::vector<double> w(lat.size());
    double s = 0.0;
    for (auto& v : w) s += (v = rng.uniform());
    for (auto& v : w) v /= s;
    return Measure1(lat, std::move(w));
}

}  // namespace fx
