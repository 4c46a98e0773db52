#ifndef HOMOGND_DIRICHLET_HPP
#define HOMOGND_DIRICHLET_HPP

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <array>

#include "homognd/closed_forms.hpp"
#include "homognd/grid.hpp"

namespace homognd {

enum class Backend { fd_nondiv, fem_div };

inline Backend backend_by_name(const std::string& s) {
    if (s == "fd-nondiv") return Backend::fd_nondiv;
    if (s == "fem-div") return Backend::fem_div;
    throw std::invalid_argument("unknown backend '" + s + "' (valid: fd-nondiv, fem-div)");
}
inline std::string backend_name(Backend b) {
    return b == Backend::fd_nondiv ? "fd-nondiv" : "fem-div";
}

struct DirichletOptions {
    double tol = 1e-10;            // relative residual of the Krylov solve
    int max_iterations = 10000;
    int direct_threshold = 300000; // direct sparse factorization below this many unknowns
};

/// The oscillatory Dirichlet problem -A(./eps):D^2 u = f on (0,1)^2.
/// fem-div additionally needs the transformed data A^div and r (the problem
/// then reads -div(A^div(./eps) grad u) = r(./eps) f).
struct EpsProblem {
    CoefficientSpec A;
    std::function<double(double, double)> f;
    Epsilon epsilon;
    Backend backend = Backend::fd_nondiv;
    std::function<double(double, double)> r;         // invariant measure accessor (periodic)
    std::function<Matrix22(double, double)> adiv;    // A^div accessor (periodic)
};

namespace detail {

using SparseRow = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using SparseCol = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Triplet = Eigen::Triplet<double>;

/// Direct factorization below the threshold, BiCGSTAB with incomplete LU
/// above it; both to the stated relative residual.
inline Eigen::VectorXd solve_sparse(const std::vector<Triplet>& trip, int n,
                                    const Eigen::VectorXd& rhs, const DirichletOptions& opt,
                                    const std::string& label) {
    if (n <= opt.direct_threshold) {
        SparseCol a(n, n);
        a.setFromTriplets(trip.begin(), trip.end());
        a.makeCompressed();
        Eigen::SparseLU<SparseCol> lu;
        lu.compute(a);
        if (lu.info() != Eigen::Success)
            throw SolverError(label + ": sparse factorization failed", 1.0, 0);
        Eigen::VectorXd x = lu.solve(rhs);
        if (lu.info() != Eigen::Success)
            throw SolverError(label + ": sparse solve failed", 1.0, 0);
        return x;
    }
    SparseRow a(n, n);
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();
    Eigen::BiCGSTAB<SparseRow, Eigen::IncompleteLUT<double>> solver;
    solver.preconditioner().setDroptol(1e-5);
    solver.preconditioner().setFillfactor(12);
    solver.setTolerance(opt.tol);
    solver.setMaxIterations(opt.max_iterations);
    solver.compute(a);
    if (solver.info() != Eigen::Success)
        throw SolverError(label + ": preconditioner setup failed", 1.0, 0);
    Eigen::VectorXd x = solver.solve(rhs);
    if (solver.info() != Eigen::Success)
        throw SolverError(label + ": iteration stagnated at relative residual " +
                              std::to_string(solver.error()),
                          solver.error(), static_cast<int>(solver.iterations()));
    return x;
}

inline bool is_boundary(int i, int j, int m) {
    return i == 0 || j == 0 || i == m || j == m;
}

/// Central second-order stencils at interior nodes (narrow second
/// differences, 4-point cross for the mixed term), identity rows with the
/// supplied data on the boundary.
inline GridFunction solve_fd_nondiv(const std::function<SymMatrix2(double, double)>& a_at,
                                    const std::function<double(double, double)>& f,
                                    const std::function<double(double, double)>& bc, int m,
                                    const DirichletOptions& opt, const std::string& label) {
    const int nn = (m + 1) * (m + 1);
    const double h = 1.0 / m, ih2 = static_cast<double>(m) * m;
    std::vector<Triplet> trip;
    trip.reserve(static_cast<size_t>(nn) * 9);
    Eigen::VectorXd rhs(nn);
    auto idx = [m](int i, int j) { return j * (m + 1) + i; };
    for (int j = 0; j <= m; ++j)
        for (int i = 0; i <= m; ++i) {
            const int row = idx(i, j);
            const double x1 = i * h, x2 = j * h;
            if (is_boundary(i, j, m)) {
                trip.emplace_back(row, row, 1.0);
                rhs(row) = bc ? bc(x1, x2) : 0.0;
                continue;
            }
            const SymMatrix2 a = a_at(x1, x2);
            trip.emplace_back(row, row, 2.0 * (a.a11 + a.a22) * ih2);
            trip.emplace_back(row, idx(i - 1, j), -a.a11 * ih2);
            trip.emplace_back(row, idx(i + 1, j), -a.a11 * ih2);
            trip.emplace_back(row, idx(i, j - 1), -a.a22 * ih2);
            trip.emplace_back(row, idx(i, j + 1), -a.a22 * ih2);
            if (a.a12 != 0.0) {
                const double c = 0.5 * a.a12 * ih2;
                trip.emplace_back(row, idx(i + 1, j + 1), -c);
                trip.emplace_back(row, idx(i - 1, j - 1), -c);
                trip.emplace_back(row, idx(i + 1, j - 1), c);
                trip.emplace_back(row, idx(i - 1, j + 1), c);
            }
            rhs(row) = f(x1, x2);
        }
    const Eigen::VectorXd x = solve_sparse(trip, nn, rhs, opt, label);
    GridFunction g = GridFunction::zero(m);
    g.dirichlet = !bc;
    for (int q = 0; q < nn; ++q) g.v[q] = x(q);
    return g;
}

/// Piecewise-linear elements on the structured right-triangle mesh for the
/// nonsymmetric form int (A^div grad u) . grad v = int (r f) v. One-point
/// (barycenter) quadrature for both sides.
inline GridFunction solve_fem_div(const std::function<Matrix22(double, double)>& adiv_at,
                                  const std::function<double(double, double)>& rf,
                                  int m, const DirichletOptions& opt, const std::string& label) {
    const int nn = (m + 1) * (m + 1);
    const double h = 1.0 / m;
    const double area = 0.5 * h * h;
    std::vector<Triplet> trip;
    trip.reserve(static_cast<size_t>(nn) * 12);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nn);
    auto idx = [m](int i, int j) { return j * (m + 1) + i; };

    std::vector<char> bdry(nn, 0);
    for (int j = 0; j <= m; ++j)
        for (int i = 0; i <= m; ++i)
            if (is_boundary(i, j, m)) bdry[idx(i, j)] = 1;

    auto add_triangle = [&](const std::array<int, 3>& vi, const std::array<int, 3>& vj) {
        double px[3], py[3];
        int node[3];
        for (int q = 0; q < 3; ++q) {
            px[q] = vi[q] * h;
            py[q] = vj[q] * h;
            node[q] = idx(vi[q], vj[q]);
        }
        // gradients of the P1 basis
        const double det = (px[1] - px[0]) * (py[2] - py[0]) - (px[2] - px[0]) * (py[1] - py[0]);
        double gx[3], gy[3];
        gx[0] = (py[1] - py[2]) / det;
        gy[0] = (px[2] - px[1]) / det;
        gx[1] = (py[2] - py[0]) / det;
        gy[1] = (px[0] - px[2]) / det;
        gx[2] = (py[0] - py[1]) / det;
        gy[2] = (px[1] - px[0]) / det;
        const double bx = (px[0] + px[1] + px[2]) / 3.0, by = (py[0] + py[1] + py[2]) / 3.0;
        const Matrix22 a = adiv_at(bx, by);
        const double load = rf(bx, by) * area / 3.0;
        for (int t = 0; t < 3; ++t) {  // test
            if (bdry[node[t]]) continue;
            for (int s = 0; s < 3; ++s) {  // trial
                if (bdry[node[s]]) continue;  // homogeneous data: column dropped
                const double fx = a.a11 * gx[s] + a.a12 * gy[s];
                const double fy = a.a21 * gx[s] + a.a22 * gy[s];
                trip.emplace_back(node[t], node[s], area * (fx * gx[t] + fy * gy[t]));
            }
            rhs(node[t]) += load;
        }
    };

    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
            add_triangle({i, i + 1, i + 1}, {j, j, j + 1});
            add_triangle({i, i + 1, i}, {j, j + 1, j + 1});
        }
    for (int q = 0; q < nn; ++q)
        if (bdry[q]) {
            trip.emplace_back(q, q, 1.0);
            rhs(q) = 0.0;
        }

    const Eigen::VectorXd x = solve_sparse(trip, nn, rhs, opt, label);
    GridFunction g = GridFunction::zero(m);
    for (int q = 0; q < nn; ++q) g.v[q] = x(q);
    return g;
}

}  // namespace detail

/// Solve the oscillatory Dirichlet problem on the (M+1)^2 nodal grid.
/// Resolution rule: M >= 16/epsilon, at least 16 cells per oscillation
/// period.
inline GridFunction solve_eps(const EpsProblem& p, int m, DirichletOptions opt = {}) {
    const int k = p.epsilon.inv;
    if (m < 16 * k)
        throw std::invalid_argument("resolution rule violated: M >= 16/epsilon requires M >= " +
                                    std::to_string(16 * k));
    const double ke = static_cast<double>(k);
    if (p.backend == Backend::fd_nondiv) {
        auto a_at = [&p, ke](double x1, double x2) { return p.A.eval(x1 * ke, x2 * ke); };
        return detail::solve_fd_nondiv(a_at, p.f, nullptr, m, opt, "solve_eps[fd-nondiv]");
    }
    if (!p.adiv || !p.r)
        throw std::invalid_argument(
            "fem-div backend needs A^div and r: run divergence_form_transform (or use a "
            "builtin pack's closed forms)");
    auto adiv_at = [&p, ke](double x1, double x2) { return p.adiv(x1 * ke, x2 * ke); };
    auto rf = [&p, ke](double x1, double x2) { return p.r(x1 * ke, x2 * ke) * p.f(x1, x2); };
    return detail::solve_fem_div(adiv_at, rf, m, opt, "solve_eps[fem-div]");
}

/// Constant-coefficient problem -Abar:D^2 u = f (fd-nondiv path).
inline GridFunction solve_homogenized(const SymMatrix2& abar,
                                      const std::function<double(double, double)>& f, int m,
                                      DirichletOptions opt = {}) {
    if (!(abar.eig_min() > 0.0))
        throw std::invalid_argument("solve_homogenized: Abar must be symmetric positive definite");
    auto a_at = [abar](double, double) { return abar; };
    return detail::solve_fd_nondiv(a_at, f, nullptr, m, opt, "solve_homogenized");
}

/// -Abar:D^2 z = -h with homogeneous data.
inline GridFunction solve_z(const SymMatrix2& abar,
                            const std::function<double(double, double)>& h, int m,
                            DirichletOptions opt = {}) {
    return solve_homogenized(
        abar, [&h](double x1, double x2) { return -h(x1, x2); }, m, opt);
}

/// Boundary corrector: zero interior source, oscillatory Dirichlet data
/// theta = -V(./eps):D^2 u imposed exactly at boundary nodes.
inline GridFunction solve_boundary_corrector(
    const CoefficientSpec& a, Epsilon eps,
    const std::function<SymMatrix2(double, double)>& v_at,  // {v11, v12, v22} at y
    const std::function<std::array<double, 3>(double, double)>& d2u_at,  // {u11, u12, u22} at x
    int m, DirichletOptions opt = {}) {
    const int k = eps.inv;
    if (m < 16 * k)
        throw std::invalid_argument("resolution rule violated: M >= 16/epsilon requires M >= " +
                                    std::to_string(16 * k));
    const double ke = static_cast<double>(k);
    auto a_at = [&a, ke](double x1, double x2) { return a.eval(x1 * ke, x2 * ke); };
    auto zero = [](double, double) { return 0.0; };
    auto bc = [&v_at, &d2u_at, ke](double x1, double x2) {
        const SymMatrix2 v = v_at(x1 * ke, x2 * ke);
        const std::array<double, 3> u = d2u_at(x1, x2);
        return -(v.a11 * u[0] + 2.0 * v.a12 * u[1] + v.a22 * u[2]);
    };
    return detail::solve_fd_nondiv(a_at, zero, bc, m, opt, "boundary_corrector");
}

// ---------------------------------------------------------------------------
// discrete calculus on nodal grids

/// Fornberg's algorithm: weights approximating the m-th derivative at x0
/// from the nodes in x (any spacing, any order of accuracy the point count
/// affords).
inline std::vector<double> fd_weights(double x0, const std::vector<double>& x, int m) {
    const int n = static_cast<int>(x.size());
    std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
    double c1 = 1.0;
    double c4 = x[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int s = mn; s >= 1; --s)
                    c[i][s] = c1 * (s * c[i - 1][s - 1] - c5 * c[i - 1][s]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int s = mn; s >= 1; --s)
                c[j][s] = (c4 * c[j][s] - s * c[j][s - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = c[i][m];
    return w;
}

struct Gradient {
    int m = 0;
    std::vector<double> d1, d2;
};
struct Hessian {
    int m = 0;
    std::vector<double> d11, d12, d22;
};
struct ThirdDerivatives {
    int m = 0;
    std::vector<double> d111, d112, d122, d222;
};

namespace detail {

/// Apply a 1D derivative stencil along one axis of a nodal grid: centered
/// windows of `width` nodes where they fit, shifted to one-sided windows at
/// the walls; weights from fd_weights scaled by h^{-order}.
inline std::vector<double> apply_axis_derivative(const std::vector<double>& v, int m, int axis,
                                                 int order, int width) {
    const int np = m + 1;
    const double h = 1.0 / m;
    // per-position window start and weights (positions 0..np-1)
    std::vector<std::vector<double>> weights(np);
    std::vector<int> start(np);
    for (int i = 0; i < np; ++i) {
        int lo = std::clamp(i - width / 2, 0, np - width);
        start[i] = lo;
        std::vector<double> pts(width);
        for (int q = 0; q < width; ++q) pts[q] = (lo + q - i) * h;
        weights[i] = fd_weights(0.0, pts, order);
    }
    std::vector<double> out(v.size());
    auto idx = [np](int i, int j) { return static_cast<size_t>(j) * np + i; };
    for (int j = 0; j < np; ++j)
        for (int i = 0; i < np; ++i) {
            const int p = (axis == 0) ? i : j;
            const auto& w = weights[p];
            const int lo = start[p];
            double s = 0.0;
            for (int q = 0; q < width; ++q)
                s += w[q] * ((axis == 0) ? v[idx(lo + q, j)] : v[idx(i, lo + q)]);
            out[idx(i, j)] = s;
        }
    return out;
}

}  // namespace detail

/// Second-order gradient: central at interior nodes, one-sided 3-point
/// formulas at the walls.
inline Gradient discrete_gradient(const GridFunction& g) {
    if (g.m < 4) throw std::invalid_argument("discrete_gradient: M >= 4 required");
    Gradient out;
    out.m = g.m;
    out.d1 = detail::apply_axis_derivative(g.v, g.m, 0, 1, 3);
    out.d2 = detail::apply_axis_derivative(g.v, g.m, 1, 1, 3);
    return out;
}

/// Second-order Hessian: narrow central second differences inside, one-sided
/// 4-point formulas within one cell of the wall; the mixed entry composes
/// the two first-derivative stencils.
inline Hessian discrete_hessian(const GridFunction& g) {
    if (g.m < 4) throw std::invalid_argument("discrete_hessian: M >= 4 required");
    Hessian out;
    out.m = g.m;
    out.d11 = detail::apply_axis_derivative(g.v, g.m, 0, 2, 4);
    out.d22 = detail::apply_axis_derivative(g.v, g.m, 1, 2, 4);
    const std::vector<double> d1 = detail::apply_axis_derivative(g.v, g.m, 0, 1, 3);
    out.d12 = detail::apply_axis_derivative(d1, g.m, 1, 1, 3);
    return out;
}

/// Fourth-order third derivatives of a (fine) nodal solution, one-sided near
/// the boundary. Wall-adjacent stencils amplify data noise by O(h^-3); meant
/// for smooth fine-grid solves.
inline ThirdDerivatives discrete_third_derivatives(const GridFunction& g) {
    if (g.m < 8) throw std::invalid_argument("discrete_third_derivatives: M >= 8 required");
    ThirdDerivatives out;
    out.m = g.m;
    out.d111 = detail::apply_axis_derivative(g.v, g.m, 0, 3, 7);
    out.d222 = detail::apply_axis_derivative(g.v, g.m, 1, 3, 7);
    const std::vector<double> d11 = detail::apply_axis_derivative(g.v, g.m, 0, 2, 6);
    out.d112 = detail::apply_axis_derivative(d11, g.m, 1, 1, 5);
    const std::vector<double> d22 = detail::apply_axis_derivative(g.v, g.m, 1, 2, 6);
    out.d122 = detail::apply_axis_derivative(d22, g.m, 0, 1, 5);
    return out;
}

/// h = sum_{j,k,l} c_j^{kl} d^3_{jkl} u from a third-derivative accessor.
inline GridFunction compute_h(
    int m, const std::function<std::array<double, 4>(double, double)>& u3, const CTensor& c) {
    if (!u3) throw std::invalid_argument("compute_h: third-derivative accessor is required");
    GridFunction g = GridFunction::zero(m);
    g.dirichlet = false;
    const double h = 1.0 / m;
    const double w111 = c.c1_11;
    const double w112 = 2.0 * c.c1_12 + c.c2_11;
    const double w122 = c.c1_22 + 2.0 * c.c2_12;
    const double w222 = c.c2_22;
    for (int j = 0; j <= m; ++j)
        for (int i = 0; i <= m; ++i) {
            const std::array<double, 4> d = u3(i * h, j * h);
            g.at(i, j) = w111 * d[0] + w112 * d[1] + w122 * d[2] + w222 * d[3];
        }
    return g;
}

}  // namespace homognd

#endif  // HOMOGND_DIRICHLET_HPP
