#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace mfgjump;

namespace {

FeedbackControl const_policy(const GameModel& m, double u) { return FeedbackControl::constant({0.0, 1.0}, m.lattice.size(), u); }

FeedbackControl ramp_policy(const GameModel& m) {
    std::vector<double> v(2 * m.lattice.size());
    for (std::size_t k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < m.lattice.size(); ++i) v[k * m.lattice.size() + i] = m.lattice.coord(i)[0];
    }
    return FeedbackControl({0.0, 1.0}, m.lattice.size(), v);
}

}  // namespace

TEST(Intensity, AffineFormula) {
    auto m = fx::default_model();
    EXPECT_DOUBLE_EQ(intensity(m, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(intensity(m, 0.5), 2.0);
    EXPECT_THROW(intensity(m, 1.5), std::invalid_argument);
    m.kernel.control_gain = 0.0;
    EXPECT_DOUBLE_EQ(intensity(m, 0.7), 1.0);
}

TEST(Intensity, BoundedByMaximum) {
    const auto m = fx::default_model();
    for (double u : m.controls.grid()) EXPECT_LE(intensity(m, u), m.max_intensity());
}

TEST(JumpDensity, TrapezoidMassIsOne) {
    const auto m = fx::default_model();
    const auto mu = fx::random_measure(m.lattice, 1);
    for (double x : {0.0, 0.13, 0.5, 1.0}) {
        const auto p = jump_density(m, 0.0, x, mu, 0.3);
        double s = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) s += p[j] * m.lattice.cell_weight(j);
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(JumpDensity, FlatForWideKernel) {
    auto m = fx::default_model();
    m.kernel.mean_pull = 0.0;
    m.kernel.jump_sigma = 10.0;
    const auto p = jump_density(m, 0.0, 0.2, GridMeasure<1>::uniform(m.lattice), 0.0);
    const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
    EXPECT_LT(*hi / *lo, 1.01);
}

TEST(JumpDensity, FullMeanPullIgnoresSource) {
    auto m = fx::default_model();
    m.kernel.mean_pull = 1.0;
    const auto mu = GridMeasure<1>::dirac(m.lattice, 50);
    for (double x : {0.0, 0.9}) {
        const auto p = jump_density(m, 0.0, x, mu, 0.5);
        EXPECT_EQ(std::max_element(p.begin(), p.end()) - p.begin(), 50);
    }
}

TEST(JumpDensity, ZeroMassThrows) {
    const auto m = fx::default_model();
    EXPECT_THROW(jump_density(m, 0.0, 0.5, GridMeasure<1>::zero(m.lattice), 0.5), std::invalid_argument);
}

TEST(JumpDensity, MatchesDirectFormula) {
    const auto m = fx::default_model();
    const auto q = destination_probabilities(m, 0.37, 0.61);
    const auto o = oracle::landing(m, 0.37, 0.61);
    for (std::size_t j = 0; j < q.size(); ++j) EXPECT_NEAR(q[j], o(static_cast<Eigen::Index>(j)), 1e-15);
}

TEST(Generator, ConstantsAreAnnihilated) {
    const auto m = fx::default_model();
    const auto mu = fx::random_measure(m.lattice, 3);
    const auto Af = apply_generator(m, 0.2, mu, ramp_policy(m), GridFunction(m.lattice.size(), 1.0));
    for (double v : Af) EXPECT_LE(std::abs(v), 1e-12);
}

TEST(Generator, NoJumpsGivesZero) {
    auto m = fx::default_model();
    m.kernel.base_rate = 0.0;
    m.kernel.control_gain = 0.0;
    GridFunction f(m.lattice.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::cos(3.0 * i);
    const auto mu = fx::random_measure(m.lattice, 5);
    for (double v : apply_generator(m, 0.0, mu, ramp_policy(m), f)) EXPECT_EQ(v, 0.0);
    for (double v : apply_adjoint(m, 0.0, mu, ramp_policy(m))) EXPECT_EQ(v, 0.0);
}

TEST(Generator, SymmetricKernelHasNoDriftInInterior) {
    auto m = fx::default_model();
    m.kernel.mean_pull = 0.0;
    m.kernel.jump_sigma = 0.05;
    GridFunction f(m.lattice.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = 2.0 * m.lattice.coord(i)[0] - 0.3;
    const auto Af = apply_generator(m, 0.0, GridMeasure<1>::uniform(m.lattice), const_policy(m, 0.5), f);
    for (std::size_t i = 30; i <= 70; ++i) EXPECT_NEAR(Af[i], 0.0, 1e-6);
}

TEST(Generator, MatchesDenseMatrix) {
    const auto m = fx::default_model(41);
    const auto mu = fx::random_measure(m.lattice, 8);
    const auto gamma = ramp_policy(m);
    const auto u = gamma.slice(0);
    const auto G = oracle::generator(m, mean_position(mu), std::vector<double>(u.begin(), u.end()));
    GridFunction f(m.lattice.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::sin(5.0 * i);
    const auto Af = apply_generator(m, 0.0, mu, gamma, f);
    const Eigen::VectorXd ref = G * Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(Af[i], ref(static_cast<Eigen::Index>(i)), 1e-12);
}

TEST(Adjoint, ConservesMass) {
    const auto m = fx::default_model();
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto d = apply_adjoint(m, 0.0, fx::random_measure(m.lattice, s), ramp_policy(m));
        double sum = 0.0;
        for (double v : d) sum += v;
        EXPECT_NEAR(sum, 0.0, 1e-9);
    }
}

TEST(Adjoint, DualityWithGenerator) {
    const auto m = fx::default_model();
    const auto gamma = ramp_policy(m);
    const auto mu = fx::random_measure(m.lattice, 21);
    const auto Astar = apply_adjoint(m, 0.0, mu, gamma);
    CounterRng rng(22, StreamTag::test);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        GridFunction f(m.lattice.size());
        for (auto& v : f) v = 2.0 * rng.uniform() - 1.0;
        const auto Af = apply_generator(m, 0.0, mu, gamma, f);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            lhs += Af[i] * mu[i];
            rhs += f[i] * Astar[i];
        }
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    EXPECT_LE(worst, 1e-8);
}

TEST(Hamiltonian, ConcaveOnControlGrid) {
    const auto m = fx::default_model();
    const auto mu = fx::random_measure(m.lattice, 2);
    GridFunction w(m.lattice.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(4.0 * m.lattice.coord(i)[0]);
    const auto r = hamiltonian_report(m, 40, mu, w);
    for (std::size_t i = 1; i + 1 < r.theta.size(); ++i) EXPECT_LE(r.theta[i + 1] - 2 * r.theta[i] + r.theta[i - 1], 1e-12);
    EXPECT_LE(r.curvature, 0.0);
}

TEST(Probe, CurvatureEqualsMinusCu) {
    const auto r = hypothesis_probe(fx::default_model(), 200, 1);
    EXPECT_NEAR(r.curvature_uu, -1.0, 1e-9);
    EXPECT_TRUE(r.passed());
    EXPECT_DOUBLE_EQ(r.lambda_max, 3.0);
}

TEST(Probe, NoMeanPullMeansNoMeasureDependence) {
    auto m = fx::default_model();
    m.kernel.mean_pull = 0.0;
    EXPECT_NEAR(hypothesis_probe(m, 200, 1).lipschitz_mu, 0.0, 1e-12);
}

TEST(Probe, XLipschitzStableAcrossSeeds) {
    const auto m = fx::default_model();
    const double a = hypothesis_probe(m, 1000, 1).lipschitz_x;
    const double b = hypothesis_probe(m, 1000, 2).lipschitz_x;
    EXPECT_GT(a, 0.0);
    EXPECT_NEAR(a / b, 1.0, 0.1);
}

TEST(Probe, RejectsFewSamples) { EXPECT_THROW(hypothesis_probe(fx::default_model(), 99, 1), std::invalid_argument); }

TEST(Validate, StructuralConstraints) {
    auto m = fx::default_model();
    EXPECT_NO_THROW(m.validate());
    m.cost.control_curvature = 0.0;
    EXPECT_THROW(m.validate(), std::invalid_argument);
    m = fx::default_model();
    m.controls.u_min = 1.0;
    EXPECT_THROW(m.validate(), std::invalid_argument);
    m = fx::default_model();
    m.kernel.base_rate = -0.5;
    EXPECT_THROW(m.validate(), std::invalid_argument);
    m = fx::default_model();
    m.kernel.control_gain = -1.0;
    EXPECT_THROW(m.validate(), std::invalid_argument);
}

TEST(FeedbackControl, PiecewiseConstantLookup) {
    const auto m = fx::default_model(3);
    FeedbackControl g({0.0, 0.5, 1.0}, 3, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
    EXPECT_DOUBLE_EQ(g(0.0, 1), 0.2);
    EXPECT_DOUBLE_EQ(g(0.49, 2), 0.3);
    EXPECT_DOUBLE_EQ(g(0.5, 0), 0.4);
    EXPECT_DOUBLE_EQ(g(1.0, 0), 0.4);  // last interval held through T
    const auto s = g.shifted(0.5, m.controls);
    EXPECT_DOUBLE_EQ(s(0.0, 2), 0.8);
    EXPECT_DOUBLE_EQ(s(1.0, 2), 1.0);
    EXPECT_THROW(FeedbackControl::constant({0.0, 1.0}, 3, 2.0).validate(m.controls), std::invalid_argument);
}
