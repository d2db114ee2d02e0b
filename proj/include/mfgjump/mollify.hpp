#pragma once

// Smoothing of Lipschitz functions by convolution with a bump, hat-function
// projections of functions and measures onto a coarse lattice over [0, M]^d,
// the smoothed finite-dimensional functional, and numerical checks of the
// approximation bounds.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfgjump/measures.hpp"
#include "mfgjump/rng.hpp"

namespace mfgjump {

/// The standard bump c exp(-1 / (1 - t^2)) on (-1, 1) with unit integral.
class Bump {
public:
    Bump() {
        using boost::math::quadrature::gauss_kronrod;
        auto raw = [](double t) { return unnormalized(t); };
        c_ = 1.0 / gauss_kronrod<double, 61>::integrate(raw, -1.0, 1.0, 20, 1e-13);
        first_moment_ = gauss_kronrod<double, 61>::integrate([this](double t) { return std::abs(t) * value(t); }, -1.0,
                                                             1.0, 20, 1e-13);
        abs_derivative_ = gauss_kronrod<double, 61>::integrate([this](double t) { return std::abs(d1(t)); }, -1.0,
                                                               1.0, 20, 1e-13);
    }

    double value(double t) const { return c_ * unnormalized(t); }

    double d1(double t) const {
        if (std::abs(t) >= 1.0) return 0.0;
        const double s = 1.0 - t * t;
        return value(t) * (-2.0 * t / (s * s));
    }

    double d2(double t) const {
        if (std::abs(t) >= 1.0) return 0.0;
        const double s = 1.0 - t * t;
        return value(t) * (4.0 * t * t / (s * s * s * s) - 2.0 / (s * s) - 8.0 * t * t / (s * s * s));
    }

    double normalization() const { return c_; }
    /// integral of |t| chi(t)
    double first_moment() const { return first_moment_; }
    /// integral of |chi'(t)|
    double abs_derivative_integral() const { return abs_derivative_; }

private:
    static double unnormalized(double t) {
        if (std::abs(t) >= 1.0) return 0.0;
        return std::exp(-1.0 / (1.0 - t * t));
    }

    double c_ = 0.0;
    double first_moment_ = 0.0;
    double abs_derivative_ = 0.0;
};

inline const Bump& standard_bump() {
    static const Bump b;
    return b;
}

struct MollifierSpec {
    double delta = 0.1;
    const Bump* bump = &standard_bump();

    void validate() const {
        if (!(delta > 0.0)) throw std::invalid_argument("mollifier: delta must be > 0");
    }
};

template <std::size_t Dim>
struct SampledFunction {
    Lattice<Dim> lattice;
    std::vector<double> values;

    static SampledFunction sample(const Lattice<Dim>& lattice, const std::function<double(const Point<Dim>&)>& f) {
        std::vector<double> v(lattice.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(lattice.coord(i));
        return {lattice, std::move(v)};
    }

    double sup_abs() const {
        double s = 0.0;
        for (double v : values) s = std::max(s, std::abs(v));
        return s;
    }
};

/// Smoothed values with first and second derivatives on the sub-lattice
/// whose nodes lie at least delta inside the original box.
template <std::size_t Dim>
struct MollifiedFunction {
    Lattice<Dim> lattice;
    std::size_t offset = 0;  // nodes trimmed per side, per axis
    std::vector<double> value;
    std::array<std::vector<double>, Dim> grad;
    std::array<std::array<std::vector<double>, Dim>, Dim> hess;

    double sup_value() const { return sup(value); }
    double sup_grad() const {
        double s = 0.0;
        for (const auto& g : grad) s = std::max(s, sup(g));
        return s;
    }
    double sup_hess() const {
        double s = 0.0;
        for (const auto& row : hess) {
            for (const auto& h : row) s = std::max(s, sup(h));
        }
        return s;
    }

    /// sup|Phi| + Lip(Phi) + max_a (sup|d_a Phi| + Lip(d_a Phi)) with
    /// l1-Lipschitz seminorms taken from the sampled derivatives.
    double c2_norm() const { return sup_value() + 2.0 * sup_grad() + sup_hess(); }

    /// Node of the source lattice corresponding to a node of this one.
    template <std::size_t D = Dim>
    std::size_t source_node(const Lattice<D>& source, std::size_t flat) const {
        auto idx = lattice.multi_index(flat);
        for (auto& i : idx) i += offset;
        return source.flat_index(idx);
    }

private:
    static double sup(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s = std::max(s, std::abs(x));
        return s;
    }
};

namespace detail {

template <std::size_t Dim>
std::vector<double> convolve_axis(const Lattice<Dim>& lat, const std::vector<double>& in, std::size_t axis,
                                  const std::vector<double>& w, std::size_t r) {
    const std::size_t n = lat.nodes_per_axis();
    std::size_t stride = 1;
    for (std::size_t a = 0; a < axis; ++a) stride *= n;
    std::vector<double> out(in.size(), 0.0);
    for (std::size_t flat = 0; flat < in.size(); ++flat) {
        const std::size_t i = (flat / stride) % n;
        if (i < r || i + r >= n) continue;
        double s = 0.0;
        // out(x) = sum_m w[m] in(x - m h), m in [-r, r]
        for (std::size_t q = 0; q <= 2 * r; ++q) s += w[q] * in[flat + r * stride - q * stride];
        out[flat] = s;
    }
    return out;
}

template <std::size_t Dim>
std::vector<double> restrict_interior(const Lattice<Dim>& lat, const Lattice<Dim>& sub, std::size_t r,
                                      const std::vector<double>& full) {
    std::vector<double> out(sub.size());
    for (std::size_t flat = 0; flat < sub.size(); ++flat) {
        auto idx = sub.multi_index(flat);
        for (auto& i : idx) i += r;
        out[flat] = full[lat.flat_index(idx)];
    }
    return out;
}

}  // namespace detail

/// Phi_delta[f] = chi_delta * f and its derivatives by discrete convolution
/// with the sampled kernel and its derivatives.
template <std::size_t Dim>
MollifiedFunction<Dim> mollify(const SampledFunction<Dim>& f, const MollifierSpec& spec) {
    spec.validate();
    const auto& lat = f.lattice;
    if (f.values.size() != lat.size()) throw std::invalid_argument("mollify: sample count mismatch");
    double h = 0.0;
    for (std::size_t a = 0; a < Dim; ++a) h = std::max(h, lat.spacing(a));
    for (std::size_t a = 0; a < Dim; ++a) {
        if (std::abs(lat.spacing(a) - h) > 1e-12 * h) throw std::invalid_argument("mollify: lattice must be isotropic");
    }
    const double delta = spec.delta;
    if (h > delta / 20.0 * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "mollify: sampling step " << h << " too coarse for delta " << delta << "; need step <= " << delta / 20.0;
        throw std::invalid_argument(os.str());
    }
    const auto r = static_cast<std::size_t>(std::ceil(delta / h - 1e-9));
    const std::size_t n = lat.nodes_per_axis();
    if (2 * r + 1 > n) throw std::invalid_argument("mollify: box narrower than 2 delta");

    const Bump& chi = *spec.bump;
    std::vector<double> w0(2 * r + 1), w1(2 * r + 1), w2(2 * r + 1);
    double s0 = 0.0;
    for (std::size_t q = 0; q <= 2 * r; ++q) {
        const double z = (static_cast<double>(q) - static_cast<double>(r)) * h;
        const double t = z / delta;
        w0[q] = chi.value(t) * h / delta;
        w1[q] = chi.d1(t) * h / (delta * delta);
        w2[q] = chi.d2(t) * h / (delta * delta * delta);
        s0 += w0[q];
    }
    for (auto& w : w0) w /= s0;
    // discrete moments: the first-derivative stencil differentiates affine data
    // exactly, the second-derivative one quadratics
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t q = 0; q <= 2 * r; ++q) {
        const double z = (static_cast<double>(q) - static_cast<double>(r)) * h;
        s1 += z * w1[q];
        s2 += 0.5 * z * z * w2[q];
    }
    for (auto& w : w1) w /= std::abs(s1);
    for (auto& w : w2) w /= s2;

    Point<Dim> lo = lat.lower();
    Point<Dim> hi = lat.upper();
    for (std::size_t a = 0; a < Dim; ++a) {
        lo[a] = lat.lower()[a] + static_cast<double>(r) * lat.spacing(a);
        hi[a] = lat.upper()[a] - static_cast<double>(r) * lat.spacing(a);
    }
    MollifiedFunction<Dim> out{Lattice<Dim>(lo, hi, n - 2 * r), r, {}, {}, {}};
    auto conv = [&](const std::vector<double>& v, std::size_t axis, const std::vector<double>& w) {
        return detail::convolve_axis(lat, v, axis, w, r);
    };
    auto keep = [&](const std::vector<double>& v) { return detail::restrict_interior(lat, out.lattice, r, v); };

    if constexpr (Dim == 1) {
        out.value = keep(conv(f.values, 0, w0));
        out.grad[0] = keep(conv(f.values, 0, w1));
        out.hess[0][0] = keep(conv(f.values, 0, w2));
    } else if constexpr (Dim == 2) {
        const auto a0 = conv(f.values, 0, w0);
        const auto a1 = conv(f.values, 0, w1);
        const auto a2 = conv(f.values, 0, w2);
        out.value = keep(conv(a0, 1, w0));
        out.grad[0] = keep(conv(a1, 1, w0));
        out.grad[1] = keep(conv(a0, 1, w1));
        out.hess[0][0] = keep(conv(a2, 1, w0));
        out.hess[0][1] = keep(conv(a1, 1, w1));
        out.hess[1][0] = out.hess[0][1];
        out.hess[1][1] = keep(conv(a0, 1, w2));
    } else {
        static_assert(Dim <= 2, "mollify supports d <= 2");
    }
    return out;
}

/// Hat-function lattice of (j + 1)^d points x_k = (M / j) k on [0, M]^d.
template <std::size_t Dim>
struct LatticeProjection {
    double M = 1.0;
    std::size_t j = 4;

    void validate() const {
        static_assert(Dim <= 2, "projections support d <= 2");
        if (!(M > 0.0)) throw std::invalid_argument("projection: M must be > 0");
        if (j < 1 || j > 32) throw std::invalid_argument("projection: j must lie in [1, 32]");
    }

    Lattice<Dim> lattice() const { return Lattice<Dim>::cube(0.0, M, j + 1); }

    /// phi_k(x) = prod_a max(0, 1 - |j x_a / M - k_a|)
    double hat(std::size_t k, const Point<Dim>& x) const {
        const auto idx = lattice().multi_index(k);
        double v = 1.0;
        for (std::size_t a = 0; a < Dim; ++a) {
            v *= std::max(0.0, 1.0 - std::abs(static_cast<double>(j) * x[a] / M - static_cast<double>(idx[a])));
        }
        return v;
    }
};

/// Nodal values f(x_k) of P_j f; evaluate with interpolate().
template <std::size_t Dim>
GridFunction project_function(const std::function<double(const Point<Dim>&)>& f, const LatticeProjection<Dim>& proj) {
    proj.validate();
    const auto lat = proj.lattice();
    GridFunction v(lat.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = f(lat.coord(k));
    return v;
}

/// P*_j mu: node k of the projection lattice receives (phi_k, mu).
template <std::size_t Dim>
GridMeasure<Dim> project_measure(const GridMeasure<Dim>& m, const LatticeProjection<Dim>& proj) {
    proj.validate();
    const auto lat = proj.lattice();
    std::vector<double> w(lat.size(), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] == 0.0) continue;
        const auto x = m.lattice().coord(i);
        if (!lat.contains(x)) throw std::out_of_range("project_measure: mass outside [0, M]^d");
        lat.for_each_corner(x, [&](std::size_t k, double c) { w[k] += m[i] * c; });
    }
    return GridMeasure<Dim>(lat, std::move(w));
}

template <std::size_t Dim>
GridMeasure<Dim> project_measure(const EmpiricalMeasure<Dim>& e, const LatticeProjection<Dim>& proj) {
    proj.validate();
    const auto lat = proj.lattice();
    for (const auto& p : e.points) {
        if (!lat.contains(p)) throw std::out_of_range("project_measure: atom outside [0, M]^d");
    }
    return deposit(e, lat);
}

/// A functional of a (possibly signed) node-mass vector on a lattice.
template <std::size_t Dim>
using LatticeFunctional = std::function<double(const Lattice<Dim>&, const std::vector<double>&)>;

template <std::size_t Dim>
double evaluate(const LatticeFunctional<Dim>& F, const GridMeasure<Dim>& m) {
    return F(m.lattice(), m.weights());
}

/// mu -> Phi_delta[f_j]((phi_k, mu)_k) with f_j(a) = F(sum_k a_k delta_{x_k}).
/// The (j + 1)^d-dimensional convolution is a fixed sample average over
/// antithetic pairs of bump-distributed shifts, exact for affine f_j.
template <std::size_t Dim>
class SmoothFunctional {
public:
    SmoothFunctional(LatticeFunctional<Dim> F, LatticeProjection<Dim> proj, MollifierSpec spec,
                     std::size_t pairs = 64, std::uint64_t seed = 0)
        : F_(std::move(F)), proj_(proj), spec_(spec) {
        proj_.validate();
        spec_.validate();
        if (pairs < 1) throw std::invalid_argument("smooth_functional: need at least one sample pair");
        const std::size_t K = proj_.lattice().size();
        CounterRng rng(seed, StreamTag::mollifier);
        const Bump& chi = *spec_.bump;
        const double peak = chi.value(0.0);
        shifts_.resize(pairs, std::vector<double>(K));
        for (auto& s : shifts_) {
            for (auto& y : s) {
                for (;;) {
                    const double t = 2.0 * rng.uniform() - 1.0;
                    if (rng.uniform() * peak <= chi.value(t)) {
                        y = spec_.delta * t;
                        break;
                    }
                }
            }
        }
    }

    double coordinate_functional(const std::vector<double>& a) const { return F_(proj_.lattice(), a); }

    double smoothed(const std::vector<double>& a) const {
        const auto lat = proj_.lattice();
        std::vector<double> plus(a.size());
        std::vector<double> minus(a.size());
        double s = 0.0;
        for (const auto& y : shifts_) {
            for (std::size_t k = 0; k < a.size(); ++k) {
                plus[k] = a[k] - y[k];
                minus[k] = a[k] + y[k];
            }
            s += F_(lat, plus) + F_(lat, minus);
        }
        return s / (2.0 * static_cast<double>(shifts_.size()));
    }

    double operator()(const GridMeasure<Dim>& m) const { return smoothed(project_measure(m, proj_).weights()); }

    /// F_j(mu) = F(P*_j mu) without smoothing.
    double projected(const GridMeasure<Dim>& m) const { return coordinate_functional(project_measure(m, proj_).weights()); }

private:
    LatticeFunctional<Dim> F_;
    LatticeProjection<Dim> proj_;
    MollifierSpec spec_;
    std::vector<std::vector<double>> shifts_;
};

template <std::size_t Dim>
SmoothFunctional<Dim> smooth_functional(LatticeFunctional<Dim> F, const LatticeProjection<Dim>& proj,
                                        const MollifierSpec& spec, std::size_t pairs = 64, std::uint64_t seed = 0) {
    return SmoothFunctional<Dim>(std::move(F), proj, spec, pairs, seed);
}

/// Randomized lower estimate of sup (f(x) - f(y)) / |x - y|_1 on a box:
/// random pairs plus short coordinate steps around the best pair.
template <std::size_t Dim>
double lipschitz_norm_estimate(const std::function<double(const Point<Dim>&)>& f, const Point<Dim>& lo,
                               const Point<Dim>& hi, std::size_t samples, std::uint64_t seed) {
    if (samples < 1000) throw std::invalid_argument("lipschitz_norm_estimate: need at least 1000 samples");
    CounterRng rng(seed, StreamTag::probe);
    auto draw = [&] {
        Point<Dim> p{};
        for (std::size_t a = 0; a < Dim; ++a) p[a] = lo[a] + (hi[a] - lo[a]) * rng.uniform();
        return p;
    };
    auto l1 = [](const Point<Dim>& x, const Point<Dim>& y) {
        double s = 0.0;
        for (std::size_t a = 0; a < Dim; ++a) s += std::abs(x[a] - y[a]);
        return s;
    };
    double best = 0.0;
    Point<Dim> best_x = draw();
    for (std::size_t s = 0; s < samples; ++s) {
        const auto x = draw();
        const auto y = draw();
        const double d = l1(x, y);
        if (d > 0.0) {
            const double q = std::abs(f(x) - f(y)) / d;
            if (q > best) {
                best = q;
                best_x = x;
            }
        }
    }
    // local refinement: coordinate differences at random points and near the best pair
    double width = 0.0;
    for (std::size_t a = 0; a < Dim; ++a) width = std::max(width, hi[a] - lo[a]);
    const double step = 1e-6 * width;
    for (std::size_t s = 0; s < samples; ++s) {
        Point<Dim> x = s % 2 == 0 ? draw() : best_x;
        if (s % 2 == 1) {
            for (std::size_t a = 0; a < Dim; ++a) {
                x[a] = std::clamp(x[a] + (hi[a] - lo[a]) * 1e-3 * (2.0 * rng.uniform() - 1.0), lo[a], hi[a]);
            }
        }
        for (std::size_t a = 0; a < Dim; ++a) {
            Point<Dim> y = x;
            y[a] = x[a] + step <= hi[a] ? x[a] + step : x[a] - step;
            const double d = std::abs(y[a] - x[a]);
            if (d > 0.0) best = std::max(best, std::abs(f(x) - f(y)) / d);
        }
    }
    return best;
}

/// Exact l1-Lipschitz seminorm of the multilinear interpolant of a lattice function.
template <std::size_t Dim>
double grid_lipschitz(const Lattice<Dim>& lat, const std::vector<double>& v) {
    double L = 0.0;
    const std::size_t n = lat.nodes_per_axis();
    for (std::size_t flat = 0; flat < lat.size(); ++flat) {
        const auto idx = lat.multi_index(flat);
        for (std::size_t a = 0; a < Dim; ++a) {
            if (idx[a] + 1 >= n) continue;
            auto nb = idx;
            ++nb[a];
            L = std::max(L, std::abs(v[lat.flat_index(nb)] - v[flat]) / lat.spacing(a));
        }
    }
    return L;
}

/// Node counts j = N^beta and width delta = N^-(1 - beta) with beta = 1 / (2 + d).
struct RegularizationSchedule {
    std::size_t j = 1;
    double delta = 1.0;
    double beta = 0.0;
};

inline RegularizationSchedule regularization_schedule(std::size_t N, std::size_t d) {
    if (N < 1 || d < 1) throw std::invalid_argument("regularization_schedule: need N >= 1 and d >= 1");
    const double beta = 1.0 / (2.0 + static_cast<double>(d));
    const double n = static_cast<double>(N);
    return {std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::pow(n, beta)))),
            std::pow(n, -(1.0 - beta)), beta};
}

struct BoundCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin() const { return rhs - lhs; }
    bool holds() const { return lhs <= rhs; }
};

inline void write_csv(std::ostream& os, const std::vector<BoundCheck>& checks) {
    os.precision(17);
    os << "bound_name,lhs,rhs,margin\n";
    for (const auto& c : checks) os << c.name << ',' << c.lhs << ',' << c.rhs << ',' << c.margin() << '\n';
}

namespace detail {

template <std::size_t Dim>
double sum_abs_offset(const Point<Dim>& x, double c) {
    double s = 0.0;
    for (std::size_t a = 0; a < Dim; ++a) s += std::abs(x[a] - c);
    return s;
}

/// Lipschitz mix used for the derivative and projection bounds.
template <std::size_t Dim>
double wavy(const Point<Dim>& x) {
    double s = 0.0;
    for (std::size_t a = 0; a < Dim; ++a) {
        s += 0.25 * std::sin(2.0 * 3.14159265358979323846 * x[a] + 0.3 * static_cast<double>(a)) +
             0.25 * std::abs(x[a] - 0.4);
    }
    return s;
}

template <std::size_t Dim>
std::string tag(const std::string& name, const std::string& param) {
    return name + "[d=" + std::to_string(Dim) + "," + param + "]";
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

template <std::size_t Dim>
std::vector<double> random_probability(std::size_t n, CounterRng& rng) {
    std::vector<double> w(n);
    double z = 0.0;
    for (auto& x : w) z += (x = -std::log(rng.uniform()));
    for (auto& x : w) x /= z;
    return w;
}

template <std::size_t Dim>
void mollifier_checks(const std::vector<double>& deltas, std::uint64_t seed, std::vector<BoundCheck>& out) {
    const Bump& chi = standard_bump();
    const auto dd = static_cast<double>(Dim);
    Point<Dim> lo{};
    Point<Dim> hi{};
    lo.fill(0.25);
    hi.fill(0.75);
    for (double delta : deltas) {
        // even node count keeps the kink of |x - 1/2| off the sample lattice
        auto n = static_cast<std::size_t>(std::ceil(0.5 / (delta / 20.0))) + 1;
        if (n % 2 == 1) ++n;
        const Lattice<Dim> lat(lo, hi, n);
        const MollifierSpec spec{delta};

        std::function<double(const Point<Dim>&)> kink = [](const Point<Dim>& x) { return sum_abs_offset(x, 0.5); };
        const auto fk = SampledFunction<Dim>::sample(lat, kink);
        const auto mk = mollify(fk, spec);
        double dev = 0.0;
        for (std::size_t i = 0; i < mk.value.size(); ++i) {
            dev = std::max(dev, std::abs(mk.value[i] - fk.values[mk.source_node(lat, i)]));
        }
        const double lip_k = lipschitz_norm_estimate<Dim>(kink, lo, hi, 2000, seed);
        out.push_back({tag<Dim>("mollifier_sup", "delta=" + fmt(delta)), dev, dd * delta * lip_k * chi.first_moment()});

        std::function<double(const Point<Dim>&)> wv = [](const Point<Dim>& x) { return wavy(x); };
        const auto fw = SampledFunction<Dim>::sample(lat, wv);
        const auto mw = mollify(fw, spec);
        const double blip = fw.sup_abs() + lipschitz_norm_estimate<Dim>(wv, lo, hi, 2000, seed + 1);
        out.push_back({tag<Dim>("mollifier_c2", "delta=" + fmt(delta)), mw.c2_norm(),
                       blip * (1.0 + chi.abs_derivative_integral() / delta)});
    }
}

template <std::size_t Dim>
void projection_checks(const std::vector<std::size_t>& js, std::uint64_t seed, std::vector<BoundCheck>& out) {
    const auto dd = static_cast<double>(Dim);
    const double M = 1.0;
    const double pow2 = std::pow(2.0, dd);
    Point<Dim> lo{};
    Point<Dim> hi{};
    hi.fill(M);
    // dense sample lattice containing every projection node for j | 64 (d=1) or j | 128 (d=2)
    const std::size_t dense_nodes = Dim == 1 ? 1025 : 129;
    const auto dense = Lattice<Dim>::cube(0.0, M, dense_nodes);
    std::function<double(const Point<Dim>&)> f = [](const Point<Dim>& x) { return wavy(x); };
    const auto fs = SampledFunction<Dim>::sample(dense, f);
    const double sup_f = fs.sup_abs();
    const double lip_f = lipschitz_norm_estimate<Dim>(f, lo, hi, 4000, seed);
    CounterRng rng(seed, StreamTag::mollifier, {Dim});

    for (std::size_t j : js) {
        const LatticeProjection<Dim> proj{M, j};
        const auto plat = proj.lattice();
        const auto nodal = project_function<Dim>(f, proj);
        double sup_p = 0.0;
        double err = 0.0;
        for (std::size_t i = 0; i < dense.size(); ++i) {
            const double v = interpolate(plat, nodal, dense.coord(i));
            sup_p = std::max(sup_p, std::abs(v));
            err = std::max(err, std::abs(v - fs.values[i]));
        }
        const std::string p = "j=" + std::to_string(j);
        out.push_back({tag<Dim>("projection_sup", p), sup_p, sup_f});
        out.push_back({tag<Dim>("projection_error", p), err, pow2 * dd * (M / static_cast<double>(j)) * lip_f});
        out.push_back({tag<Dim>("projection_lip", p), grid_lipschitz(plat, nodal), 2.0 * pow2 * dd * lip_f});

        // TV contraction of P*_j on random pairs
        double ratio = 0.0;
        for (int s = 0; s < 50; ++s) {
            const GridMeasure<Dim> a(dense, random_probability<Dim>(dense.size(), rng));
            const GridMeasure<Dim> b(dense, random_probability<Dim>(dense.size(), rng));
            const double d = tv_distance(a, b);
            ratio = std::max(ratio, tv_distance(project_measure(a, proj), project_measure(b, proj)) / d);
        }
        out.push_back({tag<Dim>("measure_projection_tv", p), ratio, 2.0 * pow2 * dd});

        // F(mu) = (f, mu); Lipschitz constants in TV over Dirac pairs
        // on probability measures are half the oscillation.
        double fmin = std::numeric_limits<double>::infinity();
        double fmax = -fmin;
        double pmin = fmin;
        double pmax = -fmin;
        for (std::size_t i = 0; i < dense.size(); ++i) {
            fmin = std::min(fmin, fs.values[i]);
            fmax = std::max(fmax, fs.values[i]);
            const double v = interpolate(plat, nodal, dense.coord(i));
            pmin = std::min(pmin, v);
            pmax = std::max(pmax, v);
        }
        out.push_back({tag<Dim>("functional_lip", p), 0.5 * (pmax - pmin), 2.0 * pow2 * dd * 0.5 * (fmax - fmin)});

        // bounded-Lipschitz dual distance between P*_j mu and mu,
        // lower-estimated over tent test functions with |h|_bLip <= 1.
        double dual = 0.0;
        for (int s = 0; s < 20; ++s) {
            const GridMeasure<Dim> mu(dense, random_probability<Dim>(dense.size(), rng));
            const auto pm = project_measure(mu, proj);
            for (int q = 0; q < 20; ++q) {
                Point<Dim> c{};
                for (auto& x : c) x = M * rng.uniform();
                const double rad = 0.5 * M / static_cast<double>(j) * rng.uniform();
                auto tent = [&](const Point<Dim>& x) {
                    double s1 = 0.0;
                    for (std::size_t a = 0; a < Dim; ++a) s1 += std::abs(x[a] - c[a]);
                    return std::max(0.0, rad - s1) / (1.0 + rad);
                };
                double v = 0.0;
                for (std::size_t i = 0; i < pm.size(); ++i) v += tent(plat.coord(i)) * pm[i];
                for (std::size_t i = 0; i < mu.size(); ++i) v -= tent(dense.coord(i)) * mu[i];
                dual = std::max(dual, std::abs(v));
            }
            // Dirac at a random point
            Point<Dim> x{};
            for (auto& c : x) c = M * rng.uniform();
            EmpiricalMeasure<Dim> e{{x}};
            const auto pe = project_measure(e, proj);
            double v = 0.0;
            const double rad = 0.5 * M / static_cast<double>(j);
            for (std::size_t i = 0; i < pe.size(); ++i) {
                double s1 = 0.0;
                for (std::size_t a = 0; a < Dim; ++a) s1 += std::abs(plat.coord(i)[a] - x[a]);
                v += std::max(0.0, rad - s1) / (1.0 + rad) * pe[i];
            }
            v -= rad / (1.0 + rad);
            dual = std::max(dual, std::abs(v));
        }
        out.push_back({tag<Dim>("measure_projection_dual", p), dual, pow2 * dd * M / static_cast<double>(j)});

        // linear F; its Lipschitz constant in the bounded-Lipschitz
        // dual norm is |f|_bLip.
        double gap = 0.0;
        for (int s = 0; s < 20; ++s) {
            const GridMeasure<Dim> mu(dense, random_probability<Dim>(dense.size(), rng));
            const auto pm = project_measure(mu, proj);
            double a = 0.0;
            double b = 0.0;
            for (std::size_t i = 0; i < pm.size(); ++i) a += f(plat.coord(i)) * pm[i];
            for (std::size_t i = 0; i < mu.size(); ++i) b += fs.values[i] * mu[i];
            gap = std::max(gap, std::abs(a - b));
        }
        out.push_back({tag<Dim>("functional_projection", p), gap, pow2 * dd * (M / static_cast<double>(j)) * (sup_f + lip_f)});
    }
}

}  // namespace detail

/// Every approximation bound, for the given refinements and widths, as
/// (lhs, rhs) pairs; rhs uses sampled lower estimates of the norms involved.
template <std::size_t Dim>
std::vector<BoundCheck> approximation_bound_report(const std::vector<std::size_t>& js, const std::vector<double>& deltas,
                                              std::uint64_t seed) {
    std::vector<BoundCheck> out;
    detail::mollifier_checks<Dim>(deltas, seed, out);
    detail::projection_checks<Dim>(js, seed, out);
    return out;
}

}  // namespace mfgjump
