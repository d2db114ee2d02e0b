#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "mfgjump/mollify.hpp"

using namespace mfgjump;

TEST(Bump, MomentsAndShape) {
    const auto& chi = standard_bump();
    EXPECT_EQ(chi.value(1.0), 0.0);
    EXPECT_EQ(chi.value(-1.2), 0.0);
    EXPECT_GT(chi.value(0.0), 0.0);
    // chi is even and unimodal, so the total variation of chi is twice its peak
    EXPECT_NEAR(chi.abs_derivative_integral(), 2.0 * chi.value(0.0), 1e-9);
    double mass = 0.0, moment = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double t = -1.0 + (i + 0.5) * 2.0 / n;
        mass += chi.value(t) * 2.0 / n;
        moment += std::abs(t) * chi.value(t) * 2.0 / n;
    }
    EXPECT_NEAR(mass, 1.0, 1e-9);
    EXPECT_NEAR(chi.first_moment(), moment, 1e-9);
    const double h = 1e-5;
    EXPECT_NEAR(chi.d1(0.3), (chi.value(0.3 + h) - chi.value(0.3 - h)) / (2 * h), 1e-6);
    EXPECT_NEAR(chi.d2(0.3), (chi.d1(0.3 + h) - chi.d1(0.3 - h)) / (2 * h), 1e-5);
}

TEST(Mollify, ConstantsAndAffineAreReproduced) {
    const auto lat = Lattice1::cube(0.0, 1.0, 401);
    const MollifierSpec spec{0.05};
    const auto c = mollify(SampledFunction<1>::sample(lat, [](const Point<1>&) { return 2.5; }), spec);
    for (double v : c.value) EXPECT_NEAR(v, 2.5, 1e-13);
    const auto a = mollify(SampledFunction<1>::sample(lat, [](const Point<1>& x) { return x[0]; }), spec);
    for (std::size_t i = 0; i < a.value.size(); ++i) {
        EXPECT_NEAR(a.value[i], a.lattice.coord(i)[0], 1e-12);
        EXPECT_NEAR(a.grad[0][i], 1.0, 1e-6);
    }
}

TEST(Mollify, CoarseSamplingNamesRequiredStep) {
    const auto lat = Lattice1::cube(0.0, 1.0, 101);
    try {
        mollify(SampledFunction<1>::sample(lat, [](const Point<1>& x) { return x[0]; }), MollifierSpec{0.1});
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("need step <= 0.005"), std::string::npos) << e.what();
    }
}

TEST(Mollify, KinkDeviationBound) {
    const auto& chi = standard_bump();
    for (double delta : {0.1, 0.05, 0.01}) {
        const auto n = static_cast<std::size_t>(std::ceil(1.0 / (delta / 20.0))) + 2;
        const auto lat = Lattice1::cube(0.0, 1.0, n);
        const auto f = SampledFunction<1>::sample(lat, [](const Point<1>& x) { return std::abs(x[0] - 0.5); });
        const auto m = mollify(f, MollifierSpec{delta});
        double dev = 0.0;
        for (std::size_t i = 0; i < m.value.size(); ++i) dev = std::max(dev, std::abs(m.value[i] - f.values[m.source_node(lat, i)]));
        EXPECT_LE(dev, delta * chi.first_moment()) << delta;
        EXPECT_GT(dev, 0.5 * delta * chi.first_moment()) << delta;
    }
}

TEST(Mollify, TwoDimensionalSeparable) {
    const auto lat = Lattice<2>::cube(0.0, 1.0, 201);
    const auto f = SampledFunction<2>::sample(lat, [](const Point<2>& x) { return 3.0 * x[0] - x[1] + 0.5; });
    const auto m = mollify(f, MollifierSpec{0.1});
    for (std::size_t i = 0; i < m.value.size(); ++i) {
        const auto p = m.lattice.coord(i);
        EXPECT_NEAR(m.value[i], 3.0 * p[0] - p[1] + 0.5, 1e-12);
        EXPECT_NEAR(m.grad[0][i], 3.0, 1e-5);
        EXPECT_NEAR(m.grad[1][i], -1.0, 1e-5);
        EXPECT_NEAR(m.hess[0][1][i], 0.0, 1e-5);
    }
}

TEST(Projection, PartitionOfUnityAndSupport) {
    CounterRng rng(1, StreamTag::test);
    for (std::size_t j : {4u, 8u, 16u}) {
        const LatticeProjection<2> proj{1.0, j};
        const auto lat = proj.lattice();
        for (int s = 0; s < 200; ++s) {
            const Point<2> x{rng.uniform(), rng.uniform()};
            double sum = 0.0;
            int support = 0;
            for (std::size_t k = 0; k < lat.size(); ++k) {
                const double h = proj.hat(k, x);
                sum += h;
                support += h > 0.0 ? 1 : 0;
            }
            EXPECT_NEAR(sum, 1.0, 1e-12);
            EXPECT_LE(support, 4);
        }
    }
}

TEST(Projection, HatLipschitzBound) {
    CounterRng rng(2, StreamTag::test);
    const LatticeProjection<2> proj{2.0, 8};
    for (int s = 0; s < 500; ++s) {
        const Point<2> x{2 * rng.uniform(), 2 * rng.uniform()};
        const Point<2> y{x[0] + 0.1 * (rng.uniform() - 0.5), x[1] + 0.1 * (rng.uniform() - 0.5)};
        const auto k = static_cast<std::size_t>(rng.uniform() * 81);
        EXPECT_LE(std::abs(proj.hat(k, x) - proj.hat(k, y)), 8.0 / 2.0 * (std::abs(x[0] - y[0]) + std::abs(x[1] - y[1])) + 1e-12);
    }
}

TEST(Projection, AffineReproducedAndSupBounded) {
    const LatticeProjection<1> proj{1.0, 4};
    const auto nodal = project_function<1>([](const Point<1>& x) { return 2.0 * x[0] - 0.3; }, proj);
    for (double x : {0.0, 0.11, 0.5, 0.93}) EXPECT_NEAR(interpolate(proj.lattice(), nodal, Point<1>{x}), 2.0 * x - 0.3, 1e-14);
    const auto wave = project_function<1>([](const Point<1>& x) { return std::sin(11.0 * x[0]); }, proj);
    for (double v : wave) EXPECT_LE(std::abs(v), 1.0);
}

TEST(Projection, MeasureMassAndDuality) {
    const auto fine = Lattice1::cube(0.0, 1.0, 65);
    const LatticeProjection<1> proj{1.0, 8};
    const auto mu = fx::random_measure(fine, 3);
    const auto pm = project_measure(mu, proj);
    EXPECT_NEAR(total_mass(pm), 1.0, 1e-14);
    auto f = [](const Point<1>& x) { return std::exp(x[0]) * std::cos(4 * x[0]); };
    const auto nodal = project_function<1>(f, proj);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) lhs += interpolate(proj.lattice(), nodal, fine.coord(i)) * mu[i];
    for (std::size_t k = 0; k < pm.size(); ++k) rhs += nodal[k] * pm[k];
    EXPECT_NEAR(lhs, rhs, 1e-10);
    const auto node = project_measure(EmpiricalMeasure<1>{{{0.375}}}, proj);
    EXPECT_NEAR(node[3], 1.0, 1e-14);
    EXPECT_THROW(project_measure(EmpiricalMeasure<1>{{{1.5}}}, proj), std::out_of_range);
    EXPECT_THROW((LatticeProjection<1>{1.0, 33}.validate()), std::invalid_argument);
}

TEST(SmoothFunctional, ConstantAndLinearFunctionals) {
    const LatticeProjection<1> proj{1.0, 16};
    const auto fine = Lattice1::cube(0.0, 1.0, 129);
    const auto mu = fx::random_measure(fine, 4);
    const auto konst = smooth_functional<1>([](const Lattice1&, const std::vector<double>&) { return 0.7; }, proj, {0.01});
    EXPECT_NEAR(konst(mu), 0.7, 1e-13);
    // affine g: the projected pairing is exact and the antithetic average preserves it
    LatticeFunctional<1> lin = [](const Lattice1& lat, const std::vector<double>& a) {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) s += (0.5 * lat.coord(k)[0] + 0.1) * a[k];
        return s;
    };
    const auto F = smooth_functional<1>(lin, proj, {0.01});
    EXPECT_NEAR(F(mu), lin(fine, mu.weights()), 1e-12);
    EXPECT_NEAR(F.projected(mu), lin(fine, mu.weights()), 1e-12);
}

TEST(SmoothFunctional, NonlinearWithinBound) {
    const LatticeProjection<1> proj{1.0, 16};
    const auto fine = Lattice1::cube(0.0, 1.0, 129);
    LatticeFunctional<1> F = [](const Lattice1& lat, const std::vector<double>& a) {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) s += std::sin(3.0 * lat.coord(k)[0]) * a[k];
        return std::abs(s - 0.2);
    };
    const auto S = smooth_functional<1>(F, proj, {0.001});
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto mu = fx::random_measure(fine, 40 + s);
        // |F|_Lip in the dual norm is at most |g|_bLip = 1 + 3
        EXPECT_LE(std::abs(S(mu) - F(fine, mu.weights())), 2.0 * (1.0 / 16.0) * 4.0 + 0.001 * 17 * 4.0);
    }
}

TEST(LipschitzEstimate, Examples) {
    EXPECT_NEAR(lipschitz_norm_estimate<1>([](const Point<1>& x) { return 2.0 * x[0]; }, {0.0}, {1.0}, 1000, 1), 2.0, 1e-6);
    EXPECT_EQ(lipschitz_norm_estimate<1>([](const Point<1>&) { return 4.0; }, {0.0}, {1.0}, 1000, 1), 0.0);
    EXPECT_NEAR(lipschitz_norm_estimate<1>([](const Point<1>& x) { return std::abs(x[0] - 0.5); }, {0.0}, {1.0}, 1000, 1), 1.0,
                1e-3);
    EXPECT_THROW(lipschitz_norm_estimate<1>([](const Point<1>&) { return 0.0; }, {0.0}, {1.0}, 999, 1), std::invalid_argument);
}

TEST(Schedule, Exponents) {
    const auto s = regularization_schedule(81, 2);
    EXPECT_DOUBLE_EQ(s.beta, 0.25);
    EXPECT_EQ(s.j, 3u);
    EXPECT_NEAR(s.delta, std::pow(81.0, -0.75), 1e-15);
}

TEST(BoundReport, AllBoundsHold) {
    for (const auto& c : approximation_bound_report<1>({4, 8, 16}, {0.1, 0.05, 0.01}, 1)) EXPECT_TRUE(c.holds()) << c.name;
    for (const auto& c : approximation_bound_report<2>({4, 8}, {0.1}, 1)) EXPECT_TRUE(c.holds()) << c.name;
}

TEST(Csv, BoundHeader) {
    std::ostringstream os;
    write_csv(os, std::vector<BoundCheck>{{"x", 1.0, 2.0}});
    EXPECT_EQ(os.str(), "bound_name,lhs,rhs,margin\nx,1,2,1\n");
}
