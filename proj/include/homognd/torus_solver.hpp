#ifndef HOMOGND_TORUS_SOLVER_HPP
#define HOMOGND_TORUS_SOLVER_HPP

#include <vector>

#include "homognd/grid.hpp"

namespace homognd {

struct KrylovResult {
    bool converged = false;
    int iterations = 0;
    double relative_residual = 0.0;  // true residual |b - A x| / |b|
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}
inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace detail

/// Right-preconditioned BiCGSTAB, matrix-free. `apply(x, y)` computes
/// y = A x, `precond(x, y)` computes y ~ A^{-1} x. Monitors the true
/// residual; x holds the initial guess on entry.
template <class Op, class Prec>
KrylovResult bicgstab(Op&& apply, Prec&& precond, const std::vector<double>& b,
                      std::vector<double>& x, double tol, int max_iterations) {
    using detail::dot;
    using detail::norm2;
    const size_t n = b.size();
    if (x.size() != n) x.assign(n, 0.0);

    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        x.assign(n, 0.0);
        return {true, 0, 0.0};
    }

    std::vector<double> r(n), r0(n), p(n, 0.0), v(n, 0.0), s(n), t(n);
    std::vector<double> phat(n), shat(n);

    apply(x, r);  // r = b - A x
    for (size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    r0 = r;

    double rho = 1.0, alpha = 1.0, omega = 1.0;
    double res = norm2(r) / bnorm;
    if (res < tol) return {true, 0, res};

    for (int it = 1; it <= max_iterations; ++it) {
        const double rho1 = dot(r0, r);
        if (std::fabs(rho1) < 1e-300) {
            // Lanczos breakdown; restart the shadow residual.
            r0 = r;
            rho = alpha = omega = 1.0;
            std::fill(p.begin(), p.end(), 0.0);
            std::fill(v.begin(), v.end(), 0.0);
            continue;
        }
        const double beta = (rho1 / rho) * (alpha / omega);
        for (size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        precond(p, phat);
        apply(phat, v);
        alpha = rho1 / dot(r0, v);
        for (size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        for (size_t i = 0; i < n; ++i) x[i] += alpha * phat[i];
        res = norm2(s) / bnorm;
        if (res < tol) return {true, it, res};

        precond(s, shat);
        apply(shat, t);
        const double tt = dot(t, t);
        if (tt == 0.0) return {false, it, res};
        omega = dot(t, s) / tt;
        for (size_t i = 0; i < n; ++i) x[i] += omega * shat[i];
        for (size_t i = 0; i < n; ++i) r[i] = s[i] - omega * t[i];
        rho = rho1;
        res = norm2(r) / bnorm;
        if (res < tol) return {true, it, res};
        if (omega == 0.0) return {false, it, res};
    }
    return {false, max_iterations, res};
}

}  // namespace homognd

#endif  // HOMOGND_TORUS_SOLVER_HPP
