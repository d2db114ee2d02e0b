#pragma once

// Finite measures on a regular box lattice, empirical measures, and the
// pairings / distances used throughout the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfgjump {

template <std::size_t Dim>
using Point = std::array<double, Dim>;

/// Real-valued function sampled at the nodes of a lattice (flat index).
using GridFunction = std::vector<double>;

/// Uniform tensor lattice on the box [lo, hi] with the same node count on
/// every axis. Axis 0 varies fastest in the flat node index.
template <std::size_t Dim>
class Lattice {
public:
    static_assert(Dim >= 1, "lattice needs at least one axis");

    Lattice(Point<Dim> lo, Point<Dim> hi, std::size_t nodes_per_axis)
        : lo_(lo), hi_(hi), nodes_(nodes_per_axis) {
        if (nodes_per_axis < 2) {
            throw std::invalid_argument("lattice: nodes_per_axis must be >= 2");
        }
        for (std::size_t a = 0; a < Dim; ++a) {
            if (!(lo[a] < hi[a])) {
                throw std::invalid_argument("lattice: domain_min must be < domain_max on every axis");
            }
            spacing_[a] = (hi[a] - lo[a]) / static_cast<double>(nodes_ - 1);
        }
        size_ = 1;
        for (std::size_t a = 0; a < Dim; ++a) size_ *= nodes_;
    }

    static Lattice cube(double lo, double hi, std::size_t nodes_per_axis) {
        Point<Dim> l{};
        Point<Dim> h{};
        l.fill(lo);
        h.fill(hi);
        return Lattice(l, h, nodes_per_axis);
    }

    std::size_t size() const { return size_; }
    std::size_t nodes_per_axis() const { return nodes_; }
    const Point<Dim>& lower() const { return lo_; }
    const Point<Dim>& upper() const { return hi_; }
    double spacing(std::size_t axis) const { return spacing_[axis]; }

    std::array<std::size_t, Dim> multi_index(std::size_t flat) const {
        std::array<std::size_t, Dim> idx{};
        for (std::size_t a = 0; a < Dim; ++a) {
            idx[a] = flat % nodes_;
            flat /= nodes_;
        }
        return idx;
    }

    std::size_t flat_index(const std::array<std::size_t, Dim>& idx) const {
        std::size_t flat = 0;
        for (std::size_t a = Dim; a-- > 0;) flat = flat * nodes_ + idx[a];
        return flat;
    }

    Point<Dim> coord(std::size_t flat) const {
        auto idx = multi_index(flat);
        Point<Dim> p{};
        for (std::size_t a = 0; a < Dim; ++a) {
            // hit the upper end exactly
            p[a] = idx[a] + 1 == nodes_ ? hi_[a] : lo_[a] + spacing_[a] * static_cast<double>(idx[a]);
        }
        return p;
    }

    /// Trapezoidal quadrature weight of a node (product over axes).
    double cell_weight(std::size_t flat) const {
        auto idx = multi_index(flat);
        double w = 1.0;
        for (std::size_t a = 0; a < Dim; ++a) {
            const bool edge = idx[a] == 0 || idx[a] + 1 == nodes_;
            w *= edge ? 0.5 * spacing_[a] : spacing_[a];
        }
        return w;
    }

    bool contains(const Point<Dim>& p, double tol = 1e-12) const {
        for (std::size_t a = 0; a < Dim; ++a) {
            if (!(p[a] >= lo_[a] - tol && p[a] <= hi_[a] + tol)) return false;
        }
        return true;
    }

    /// Calls f(node, weight) for every corner of the cell enclosing p with
    /// its multilinear (tent) weight. Corners with zero weight are skipped.
    template <class F>
    void for_each_corner(const Point<Dim>& p, F&& f) const {
        if (!contains(p)) {
            throw std::out_of_range("lattice: point outside the domain box");
        }
        std::array<std::size_t, Dim> base{};
        std::array<double, Dim> frac{};
        for (std::size_t a = 0; a < Dim; ++a) {
            double s = (p[a] - lo_[a]) / spacing_[a];
            s = std::clamp(s, 0.0, static_cast<double>(nodes_ - 1));
            auto b = static_cast<std::size_t>(std::floor(s));
            if (b + 1 >= nodes_) b = nodes_ - 2;
            base[a] = b;
            frac[a] = s - static_cast<double>(b);
        }
        for (std::size_t corner = 0; corner < (std::size_t{1} << Dim); ++corner) {
            std::array<std::size_t, Dim> idx{};
            double w = 1.0;
            for (std::size_t a = 0; a < Dim; ++a) {
                const bool upper = (corner >> a) & 1U;
                idx[a] = base[a] + (upper ? 1 : 0);
                w *= upper ? frac[a] : 1.0 - frac[a];
            }
            if (w != 0.0) f(flat_index(idx), w);
        }
    }

    /// Nearest node (ties broken toward the lower node).
    std::size_t nearest_node(const Point<Dim>& p) const {
        std::array<std::size_t, Dim> idx{};
        for (std::size_t a = 0; a < Dim; ++a) {
            double s = std::round((p[a] - lo_[a]) / spacing_[a]);
            s = std::clamp(s, 0.0, static_cast<double>(nodes_ - 1));
            idx[a] = static_cast<std::size_t>(s);
        }
        return flat_index(idx);
    }

    friend bool operator==(const Lattice& x, const Lattice& y) {
        return x.lo_ == y.lo_ && x.hi_ == y.hi_ && x.nodes_ == y.nodes_;
    }

private:
    Point<Dim> lo_;
    Point<Dim> hi_;
    std::size_t nodes_;
    Point<Dim> spacing_{};
    std::size_t size_ = 0;
};

/// Nonnegative finite measure carried by the nodes of a lattice.
template <std::size_t Dim>
class GridMeasure {
public:
    GridMeasure(Lattice<Dim> lattice, std::vector<double> weights)
        : lattice_(std::move(lattice)), weights_(std::move(weights)) {
        if (weights_.size() != lattice_.size()) {
            throw std::invalid_argument("grid measure: weight count does not match lattice size");
        }
        for (double w : weights_) {
            if (!std::isfinite(w) || w < 0.0) {
                throw std::invalid_argument("grid measure: weights must be finite and >= 0");
            }
        }
    }

    static GridMeasure zero(const Lattice<Dim>& lattice) {
        return GridMeasure(lattice, std::vector<double>(lattice.size(), 0.0));
    }

    static GridMeasure dirac(const Lattice<Dim>& lattice, std::size_t node, double mass = 1.0) {
        std::vector<double> w(lattice.size(), 0.0);
        w.at(node) = mass;
        return GridMeasure(lattice, std::move(w));
    }

    static GridMeasure uniform(const Lattice<Dim>& lattice) {
        return GridMeasure(lattice, std::vector<double>(lattice.size(), 1.0 / static_cast<double>(lattice.size())));
    }

    const Lattice<Dim>& lattice() const { return lattice_; }
    const std::vector<double>& weights() const { return weights_; }
    double operator[](std::size_t i) const { return weights_[i]; }
    std::size_t size() const { return weights_.size(); }

private:
    Lattice<Dim> lattice_;
    std::vector<double> weights_;
};

/// (1/N) sum of Dirac masses at the given points.
template <std::size_t Dim>
struct EmpiricalMeasure {
    std::vector<Point<Dim>> points;

    std::size_t size() const { return points.size(); }
    double atom_weight() const { return 1.0 / static_cast<double>(points.size()); }
};

/// Time-indexed family of grid measures sharing one lattice.
template <std::size_t Dim>
struct MeasureCurve {
    std::vector<double> times;
    std::vector<GridMeasure<Dim>> snapshots;

    MeasureCurve() = default;
    MeasureCurve(std::vector<double> t, std::vector<GridMeasure<Dim>> s)
        : times(std::move(t)), snapshots(std::move(s)) {
        if (times.size() != snapshots.size()) {
            throw std::invalid_argument("measure curve: times and snapshots differ in length");
        }
        for (std::size_t k = 1; k < times.size(); ++k) {
            if (!(times[k] > times[k - 1])) {
                throw std::invalid_argument("measure curve: times must be strictly increasing");
            }
        }
        for (const auto& m : snapshots) {
            if (!(m.lattice() == snapshots.front().lattice())) {
                throw std::invalid_argument("measure curve: snapshots must share one lattice");
            }
        }
    }

    std::size_t size() const { return times.size(); }
    const Lattice<Dim>& lattice() const { return snapshots.front().lattice(); }
};

enum class FunctionalKind { linear, quadratic_of_linear };

/// F(mu) = (g, mu) or (g, mu)^2 for a lattice function g.
struct TestFunctional {
    FunctionalKind kind = FunctionalKind::linear;
    GridFunction g;

    double apply(double linear_value) const {
        return kind == FunctionalKind::linear ? linear_value : linear_value * linear_value;
    }
};

template <std::size_t Dim>
double total_mass(const GridMeasure<Dim>& m) {
    return std::accumulate(m.weights().begin(), m.weights().end(), 0.0);
}

inline void require_same_lattice(bool same, const char* what) {
    if (!same) throw std::invalid_argument(std::string(what) + ": lattice mismatch");
}

/// Total variation norm of a - b, i.e. sum of absolute node differences.
template <std::size_t Dim>
double tv_distance(const GridMeasure<Dim>& a, const GridMeasure<Dim>& b) {
    require_same_lattice(a.lattice() == b.lattice(), "tv_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

/// sup over time of the TV distance between two curves on the same time grid.
template <std::size_t Dim>
double sup_tv_distance(const MeasureCurve<Dim>& a, const MeasureCurve<Dim>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("sup_tv_distance: curves differ in length");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s = std::max(s, tv_distance(a.snapshots[k], b.snapshots[k]));
    return s;
}

/// Multilinear interpolation of a lattice function at an arbitrary point.
template <std::size_t Dim>
double interpolate(const Lattice<Dim>& lattice, const GridFunction& g, const Point<Dim>& p) {
    double v = 0.0;
    lattice.for_each_corner(p, [&](std::size_t node, double w) { v += w * g[node]; });
    return v;
}

template <std::size_t Dim>
double pair_linear(const GridFunction& g, const GridMeasure<Dim>& m) {
    if (g.size() != m.size()) throw std::invalid_argument("pair: grid function size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += g[i] * m[i];
    return s;
}

template <std::size_t Dim>
double pair(const TestFunctional& F, const GridMeasure<Dim>& m) {
    return F.apply(pair_linear(F.g, m));
}

/// Pairing with an empirical measure; g is interpolated at the atoms.
template <std::size_t Dim>
double pair(const TestFunctional& F, const EmpiricalMeasure<Dim>& e, const Lattice<Dim>& lattice) {
    if (F.g.size() != lattice.size()) throw std::invalid_argument("pair: grid function size mismatch");
    if (e.points.empty()) throw std::invalid_argument("pair: empty empirical measure");
    double s = 0.0;
    for (const auto& p : e.points) s += interpolate(lattice, F.g, p);
    return F.apply(s / static_cast<double>(e.size()));
}

/// Splits every atom's mass to its cell corners with multilinear weights.
template <std::size_t Dim>
GridMeasure<Dim> deposit(const EmpiricalMeasure<Dim>& e, const Lattice<Dim>& lattice) {
    if (e.points.empty()) throw std::invalid_argument("deposit: empty empirical measure");
    std::vector<double> w(lattice.size(), 0.0);
    const double mass = e.atom_weight();
    for (const auto& p : e.points) {
        if (!lattice.contains(p)) throw std::out_of_range("deposit: atom outside the domain box");
        lattice.for_each_corner(p, [&](std::size_t node, double c) { w[node] += mass * c; });
    }
    return GridMeasure<Dim>(lattice, std::move(w));
}

/// Mass-weighted mean of the first coordinate.
template <std::size_t Dim>
double mean_position(const GridMeasure<Dim>& m, std::size_t axis = 0) {
    double mass = 0.0;
    double first = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        mass += m[i];
        first += m[i] * m.lattice().coord(i)[axis];
    }
    if (!(mass > 0.0)) throw std::invalid_argument("mean_position: measure has zero mass");
    return first / mass;
}

/// Convex combination (1 - theta) a + theta b; stays nonnegative.
template <std::size_t Dim>
GridMeasure<Dim> mix(const GridMeasure<Dim>& a, const GridMeasure<Dim>& b, double theta) {
    require_same_lattice(a.lattice() == b.lattice(), "mix");
    std::vector<double> w(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) w[i] = (1.0 - theta) * a[i] + theta * b[i];
    return GridMeasure<Dim>(a.lattice(), std::move(w));
}

/// Discretizes a Gaussian bump onto the lattice and normalizes it to mass 1.
inline GridMeasure<1> discretized_gaussian(const Lattice<1>& lattice, double mean, double sd) {
    if (!(sd > 0.0)) throw std::invalid_argument("discretized_gaussian: sd must be > 0");
    std::vector<double> w(lattice.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double z = (lattice.coord(i)[0] - mean) / sd;
        w[i] = std::exp(-0.5 * z * z) * lattice.cell_weight(i);
    }
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= s;
    return GridMeasure<1>(lattice, std::move(w));
}

template <std::size_t Dim>
void write_csv(std::ostream& os, const GridMeasure<Dim>& m) {
    os.precision(17);
    os << "node_index";
    for (std::size_t a = 0; a < Dim; ++a) os << ",coord" << a;
    os << ",weight\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        os << i;
        const auto p = m.lattice().coord(i);
        for (std::size_t a = 0; a < Dim; ++a) os << ',' << p[a];
        os << ',' << m[i] << '\n';
    }
}

template <std::size_t Dim>
void write_csv(std::ostream& os, const MeasureCurve<Dim>& c) {
    os.precision(17);
    os << "time,node_index,weight\n";
    for (std::size_t k = 0; k < c.size(); ++k) {
        for (std::size_t i = 0; i < c.snapshots[k].size(); ++i) {
            os << c.times[k] << ',' << i << ',' << c.snapshots[k][i] << '\n';
        }
    }
}

}  // namespace mfgjump
