#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace mfgjump;

namespace {

FeedbackControl constant(const GameModel& m, std::size_t steps, double u) {
    return FeedbackControl::constant(uniform_times(1.0, steps), m.lattice.size(), u);
}

Eigen::VectorXd as_vector(const Measure1& m) {
    return Eigen::Map<const Eigen::VectorXd>(m.weights().data(), static_cast<Eigen::Index>(m.size()));
}

}  // namespace

TEST(KineticStep, FrozenWithoutJumps) {
    auto m = fx::default_model();
    m.kernel.base_rate = 0.0;
    m.kernel.control_gain = 0.0;
    const auto mu = fx::random_measure(m.lattice, 1);
    const auto next = kinetic_step(m, mu, 0.0, 0.01, constant(m, 100, 0.5));
    EXPECT_EQ(next.weights(), mu.weights());
}

TEST(KineticStep, ConservesMass) {
    const auto m = fx::default_model();
    const auto mu = fx::random_measure(m.lattice, 2);
    for (auto integ : {Integrator::euler, Integrator::rk4}) {
        const auto next = kinetic_step(m, mu, 0.0, 0.005, constant(m, 200, 0.7), integ);
        EXPECT_NEAR(total_mass(next), 1.0, 1e-9);
    }
}

TEST(KineticStep, EulerMatchesDenseMatrixProduct) {
    auto m = fx::default_model();
    m.kernel.mean_pull = 1.0;
    const auto mu = discretized_gaussian(m.lattice, 0.2, 0.02);
    const double dt = 0.005;
    const auto next = kinetic_step(m, mu, 0.0, dt, constant(m, 200, 0.4), Integrator::euler);
    const auto G = oracle::generator(m, mean_position(mu), std::vector<double>(m.lattice.size(), 0.4));
    const Eigen::VectorXd ref = as_vector(mu) + dt * G.transpose() * as_vector(mu);
    for (std::size_t i = 0; i < mu.size(); ++i) EXPECT_NEAR(next[i], ref(static_cast<Eigen::Index>(i)), 1e-12);
}

TEST(KineticStep, StabilityGuardNamesRequiredStep) {
    const auto m = fx::default_model();
    try {
        kinetic_step(m, fx::random_measure(m.lattice, 1), 0.0, 0.2, constant(m, 10, 0.5));
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("need dt <= 0.166667"), std::string::npos) << e.what();
    }
}

TEST(SolveKinetic, ZeroHorizon) {
    const auto m = fx::default_model();
    const auto mu = fx::random_measure(m.lattice, 3);
    const auto c = solve_kinetic(m, mu, constant(m, 200, 0.5), {}, 0.0);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c.snapshots[0].weights(), mu.weights());
}

TEST(SolveKinetic, MassAndPositivity) {
    const auto m = fx::default_model();
    ClipLog log;
    const auto c = solve_kinetic(m, discretized_gaussian(m.lattice, 0.3, 0.1), constant(m, 200, 1.0), {}, 1.0, &log);
    for (const auto& s : c.snapshots) EXPECT_NEAR(total_mass(s), 1.0, 1e-8);
    EXPECT_EQ(log.total, 0.0);
}

TEST(SolveKinetic, MatchesMatrixExponentialForLinearDynamics) {
    auto m = fx::default_model();
    m.kernel.mean_pull = 0.0;
    const auto mu0 = discretized_gaussian(m.lattice, 0.3, 0.1);
    const auto c = solve_kinetic(m, mu0, constant(m, 200, 0.6), {}, 1.0);
    const auto G = oracle::generator(m, 0.0, std::vector<double>(m.lattice.size(), 0.6));
    double worst = 0.0;
    for (std::size_t k : {std::size_t{50}, std::size_t{200}}) {
        const auto ref = oracle::propagate(G, as_vector(mu0), c.times[k]);
        worst = std::max(worst, (as_vector(c.snapshots[k]) - ref).cwiseAbs().maxCoeff());
    }
    EXPECT_LE(worst, 1e-6);
}

TEST(SolveKinetic, StationaryLawStaysPut) {
    auto m = fx::default_model();
    m.kernel.mean_pull = 0.0;
    const auto G = oracle::generator(m, 0.0, std::vector<double>(m.lattice.size(), 0.5));
    const Eigen::VectorXd pi = oracle::stationary(G);
    std::vector<double> w(pi.data(), pi.data() + pi.size());
    for (auto& v : w) v = std::max(v, 0.0);
    double s = 0.0;
    for (double v : w) s += v;
    for (auto& v : w) v /= s;
    const Measure1 mu0(m.lattice, w);
    const auto c = solve_kinetic(m, mu0, constant(m, 200, 0.5), {}, 1.0);
    for (const auto& snap : c.snapshots) EXPECT_LE(tv_distance(snap, mu0), 1e-5);
}

TEST(SolveKinetic, RefinementOrder) {
    const auto m = fx::default_model();
    const auto mu0 = discretized_gaussian(m.lattice, 0.3, 0.1);
    auto final_at = [&](std::size_t steps, Integrator integ) {
        return solve_kinetic(m, mu0, constant(m, steps, 0.8), {steps, integ, true}, 1.0).snapshots.back();
    };
    const auto ref = final_at(1600, Integrator::rk4);
    const double e1 = tv_distance(final_at(100, Integrator::euler), ref);
    const double e2 = tv_distance(final_at(200, Integrator::euler), ref);
    EXPECT_NEAR(e1 / e2, 2.0, 0.3);
    const double r1 = tv_distance(final_at(25, Integrator::rk4), ref);
    const double r2 = tv_distance(final_at(50, Integrator::rk4), ref);
    EXPECT_GT(r1 / r2, 10.0);
}

TEST(KineticConfig, RejectsFewSteps) { EXPECT_THROW((KineticSolveConfig{9, Integrator::rk4, true}.validate()), std::invalid_argument); }

TEST(Sensitivity, StartsAtOneAndIsSymmetric) {
    const auto m = fx::default_model();
    const auto a = fx::random_measure(m.lattice, 4);
    const auto b = fx::random_measure(m.lattice, 5);
    const auto g = constant(m, 200, 0.3);
    const auto r = initial_sensitivity_probe(m, a, b, g, {}, 1.0);
    const auto s = initial_sensitivity_probe(m, b, a, g, {}, 1.0, 2);
    EXPECT_DOUBLE_EQ(r.front(), 1.0);
    EXPECT_EQ(r, s);
    EXPECT_THROW(initial_sensitivity_probe(m, a, a, g, {}, 1.0), std::invalid_argument);
}

TEST(Sensitivity, LinearDynamicsWithinOperatorNormBound) {
    auto m = fx::default_model();
    m.kernel.mean_pull = 0.0;
    const auto g = constant(m, 200, 0.9);
    const auto times = uniform_times(1.0, 200);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto r = initial_sensitivity_probe(m, fx::random_measure(m.lattice, 10 + s),
                                                 discretized_gaussian(m.lattice, 0.2 + 0.1 * s, 0.05), g, {}, 1.0);
        for (std::size_t k = 0; k < r.size(); ++k) EXPECT_LE(r[k], std::exp(2.0 * m.max_intensity() * times[k]));
    }
}
