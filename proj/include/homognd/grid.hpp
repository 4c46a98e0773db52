#ifndef HOMOGND_GRID_HPP
#define HOMOGND_GRID_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace homognd {

inline constexpr double pi = std::numbers::pi;

/// Thrown when an iterative solve stalls; carries the residual it reached.
struct SolverError : std::runtime_error {
    SolverError(const std::string& what, double residual_, int iterations_)
        : std::runtime_error(what), residual(residual_), iterations(iterations_) {}
    double residual;
    int iterations;
};

/// Symmetric 2x2 matrix (the coefficient A, the effective matrix, corrector
/// bundles {v11, v12, v22}).
struct SymMatrix2 {
    double a11 = 0.0, a12 = 0.0, a22 = 0.0;

    static SymMatrix2 identity() { return {1.0, 0.0, 1.0}; }

    double eig_min() const {
        const double m = 0.5 * (a11 + a22);
        const double d = std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12);
        return m - d;
    }
    double eig_max() const {
        const double m = 0.5 * (a11 + a22);
        const double d = std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12);
        return m + d;
    }
    double max_abs() const {
        return std::max({std::fabs(a11), std::fabs(a12), std::fabs(a22)});
    }
};

/// General (possibly nonsymmetric) 2x2 matrix; A^div lives here.
struct Matrix22 {
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;
};

enum class FieldKind { scalar, matrix };

/// Samples on the uniform N x N periodic grid over Y = [0,1]^2.
/// Node (i,j) sits at y = (i/N, j/N); no duplicated boundary row/column is
/// stored. Storage is row-major with i (the y1 index) fastest. Matrix fields
/// interleave the four entries (a11, a12, a21, a22) per node.
struct TorusField {
    int n = 0;
    FieldKind kind = FieldKind::scalar;
    std::vector<double> data;

    static TorusField scalar(int n, double fill = 0.0) {
        TorusField f;
        f.n = n;
        f.kind = FieldKind::scalar;
        f.data.assign(static_cast<size_t>(n) * n, fill);
        return f;
    }
    static TorusField matrix(int n) {
        TorusField f;
        f.n = n;
        f.kind = FieldKind::matrix;
        f.data.assign(static_cast<size_t>(n) * n * 4, 0.0);
        return f;
    }

    int comps() const { return kind == FieldKind::matrix ? 4 : 1; }

    static int wrap(int i, int n) {
        i %= n;
        return i < 0 ? i + n : i;
    }

    double& at(int i, int j) { return data[static_cast<size_t>(j) * n + i]; }
    double at(int i, int j) const { return data[static_cast<size_t>(j) * n + i]; }
    double& at(int i, int j, int e) {
        return data[(static_cast<size_t>(j) * n + i) * 4 + e];
    }
    double at(int i, int j, int e) const {
        return data[(static_cast<size_t>(j) * n + i) * 4 + e];
    }
    double at_wrapped(int i, int j) const { return at(wrap(i, n), wrap(j, n)); }

    double mean() const {
        double s = 0.0;
        for (double v : data) s += v;
        return s / static_cast<double>(data.size());
    }
    double min_value() const {
        double m = data.empty() ? 0.0 : data[0];
        for (double v : data) m = std::min(m, v);
        return m;
    }
    double max_abs() const {
        double m = 0.0;
        for (double v : data) m = std::max(m, std::fabs(v));
        return m;
    }
};

/// Periodic bilinear interpolation of a scalar torus field at y in R^2.
inline double sample_periodic(const TorusField& f, double y1, double y2, int comp = 0) {
    const int n = f.n;
    double t1 = (y1 - std::floor(y1)) * n;
    double t2 = (y2 - std::floor(y2)) * n;
    int i0 = static_cast<int>(t1);
    int j0 = static_cast<int>(t2);
    if (i0 >= n) i0 -= n;
    if (j0 >= n) j0 -= n;
    const double s = t1 - i0, t = t2 - j0;
    const int i1 = TorusField::wrap(i0 + 1, n), j1 = TorusField::wrap(j0 + 1, n);
    auto val = [&](int i, int j) {
        return f.kind == FieldKind::matrix ? f.at(i, j, comp) : f.at(i, j);
    };
    return (1 - s) * (1 - t) * val(i0, j0) + s * (1 - t) * val(i1, j0) +
           (1 - s) * t * val(i0, j1) + s * t * val(i1, j1);
}

/// Nodal values on the uniform (M+1) x (M+1) grid over [0,1]^2.
/// Node (i,j) sits at x = (i/M, j/M); storage row-major with i fastest.
struct GridFunction {
    int m = 0;
    std::vector<double> v;
    bool dirichlet = true;  // boundary nodes identically zero when set

    static GridFunction zero(int m) {
        GridFunction g;
        g.m = m;
        g.v.assign(static_cast<size_t>(m + 1) * (m + 1), 0.0);
        return g;
    }
    static GridFunction sample(int m, const std::function<double(double, double)>& fn) {
        GridFunction g = zero(m);
        g.dirichlet = false;
        const double h = 1.0 / m;
        for (int j = 0; j <= m; ++j)
            for (int i = 0; i <= m; ++i) g.at(i, j) = fn(i * h, j * h);
        return g;
    }

    size_t nodes() const { return static_cast<size_t>(m + 1) * (m + 1); }
    double& at(int i, int j) { return v[static_cast<size_t>(j) * (m + 1) + i]; }
    double at(int i, int j) const { return v[static_cast<size_t>(j) * (m + 1) + i]; }
    double h() const { return 1.0 / m; }

    double max_abs() const {
        double r = 0.0;
        for (double x : v) r = std::max(r, std::fabs(x));
        return r;
    }
};

/// Bilinear interpolation of a grid function at x in [0,1]^2.
inline double sample_grid(const GridFunction& g, double x1, double x2) {
    const int m = g.m;
    double t1 = std::clamp(x1, 0.0, 1.0) * m;
    double t2 = std::clamp(x2, 0.0, 1.0) * m;
    int i0 = std::min(static_cast<int>(t1), m - 1);
    int j0 = std::min(static_cast<int>(t2), m - 1);
    const double s = t1 - i0, t = t2 - j0;
    return (1 - s) * (1 - t) * g.at(i0, j0) + s * (1 - t) * g.at(i0 + 1, j0) +
           (1 - s) * t * g.at(i0, j0 + 1) + s * t * g.at(i0 + 1, j0 + 1);
}

/// A periodic 2x2 symmetric uniformly elliptic coefficient field, either
/// closed-form or backed by torus samples. lambda/Lambda are eigenvalue
/// bounds estimated on a 64x64 sample grid.
struct CoefficientSpec {
    std::string name;
    std::function<SymMatrix2(double, double)> eval;
    double lambda = 0.0;
    double Lambda = 0.0;

    SymMatrix2 operator()(double y1, double y2) const { return eval(y1, y2); }

    static CoefficientSpec from_function(std::string name,
                                         std::function<SymMatrix2(double, double)> fn) {
        CoefficientSpec c;
        c.name = std::move(name);
        c.eval = std::move(fn);
        c.estimate_bounds();
        return c;
    }

    /// Off-grid evaluation of sampled coefficients is bilinear; second-order
    /// accuracy is all the downstream solvers need.
    static CoefficientSpec from_samples(std::string name, TorusField samples) {
        if (samples.kind != FieldKind::matrix)
            throw std::invalid_argument("coefficient samples must be a matrix torus field");
        auto field = std::make_shared<TorusField>(std::move(samples));
        CoefficientSpec c;
        c.name = std::move(name);
        c.eval = [field](double y1, double y2) {
            SymMatrix2 a;
            a.a11 = sample_periodic(*field, y1, y2, 0);
            a.a12 = 0.5 * (sample_periodic(*field, y1, y2, 1) +
                           sample_periodic(*field, y1, y2, 2));
            a.a22 = sample_periodic(*field, y1, y2, 3);
            return a;
        };
        c.estimate_bounds();
        return c;
    }

    void estimate_bounds() {
        const int s = 64;
        lambda = std::numeric_limits<double>::infinity();
        Lambda = -lambda;
        for (int j = 0; j < s; ++j)
            for (int i = 0; i < s; ++i) {
                const SymMatrix2 a = eval(static_cast<double>(i) / s, static_cast<double>(j) / s);
                lambda = std::min(lambda, a.eig_min());
                Lambda = std::max(Lambda, a.eig_max());
            }
    }
};

/// The oscillation parameter, restricted to reciprocals of integers so the
/// unit square contains whole periods.
struct Epsilon {
    int inv = 1;  // epsilon = 1/inv

    double value() const { return 1.0 / inv; }

    static Epsilon of_inverse(int k) {
        if (k < 1) throw std::invalid_argument("epsilon must lie in (0,1]");
        return Epsilon{k};
    }

    /// Accepts "1/8" or a decimal; rejects values that are not reciprocals
    /// of positive integers.
    static Epsilon parse(const std::string& s) {
        const auto slash = s.find('/');
        if (slash != std::string::npos) {
            const long num = std::stol(s.substr(0, slash));
            const long den = std::stol(s.substr(slash + 1));
            if (num != 1 || den < 1)
                throw std::invalid_argument("epsilon must be the reciprocal of a positive integer, got " + s);
            return Epsilon{static_cast<int>(den)};
        }
        const double v = std::stod(s);
        if (!(v > 0.0 && v <= 1.0))
            throw std::invalid_argument("epsilon must lie in (0,1], got " + s);
        const double k = 1.0 / v;
        const double kr = std::round(k);
        if (std::fabs(k - kr) > 1e-9 * k)
            throw std::invalid_argument("epsilon must be the reciprocal of a positive integer, got " + s);
        return Epsilon{static_cast<int>(kr)};
    }

    std::string label() const { return "1/" + std::to_string(inv); }
};

}  // namespace homognd

#endif  // HOMOGND_GRID_HPP
