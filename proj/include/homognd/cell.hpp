#ifndef HOMOGND_CELL_HPP
#define HOMOGND_CELL_HPP

#include <array>
#include <map>
#include <optional>

#include "homognd/closed_forms.hpp"
#include "homognd/grid.hpp"
#include "homognd/torus_fft.hpp"
#include "homognd/torus_solver.hpp"

namespace homognd {

struct CellOptions {
    double tol = 1e-10;          // relative residual of every Krylov solve
    int max_iterations = 10000;
    double compat_tol = 1e-8;    // solvability integrals against the invariant measure
};

enum class Classification { c_good, c_bad };

/// c-bad iff some |c_j^{kl}| strictly exceeds tol * scale (ties are c-good).
inline Classification classify(const CTensor& c, double scale, double tol = 1e-5) {
    if (!(scale > 0.0)) throw std::invalid_argument("classify: scale must be positive");
    return c.max_abs() > tol * scale ? Classification::c_bad : Classification::c_good;
}

/// Periodic cell-problem engine on the unit torus. All problems are
/// discretized with second-order central differences (narrow 3-point second
/// differences, 4-point cross stencil) on the N x N grid and solved
/// matrix-free: BiCGSTAB preconditioned by the FFT inverse of the
/// constant-coefficient operator, with the singular directions handled by
/// mean projection. Solutions are cached; one engine per thread of use.
class CellEngine {
 public:
    CellEngine(CoefficientSpec a, int n, CellOptions opt = {})
        : spec_(std::move(a)), n_(n), opt_(opt), fft_(n) {
        const size_t sz = static_cast<size_t>(n) * n;
        a11_.resize(sz);
        a12_.resize(sz);
        a22_.resize(sz);
        double min_eig = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const SymMatrix2 m =
                    spec_.eval(static_cast<double>(i) / n, static_cast<double>(j) / n);
                const size_t idx = static_cast<size_t>(j) * n + i;
                a11_[idx] = m.a11;
                a12_[idx] = m.a12;
                a22_[idx] = m.a22;
                min_eig = std::min(min_eig, m.eig_min());
                mean_a_.a11 += m.a11;
                mean_a_.a12 += m.a12;
                mean_a_.a22 += m.a22;
            }
        mean_a_.a11 /= static_cast<double>(sz);
        mean_a_.a12 /= static_cast<double>(sz);
        mean_a_.a22 /= static_cast<double>(sz);
        if (!(min_eig > 0.0) || !(spec_.lambda > 0.0))
            throw std::invalid_argument("coefficient is not uniformly elliptic on the grid");
    }

    int n() const { return n_; }
    const CoefficientSpec& coefficient() const { return spec_; }
    const std::map<std::string, double>& residuals() const { return residuals_; }

    /// Null vector of the discrete adjoint -D_h^2:(A r), positive, mean one.
    const TorusField& invariant_measure() {
        if (r_) return *r_;
        const size_t sz = a11_.size();
        std::vector<double> ones(sz, 1.0), rhs(sz), rho(sz, 0.0);
        apply_adjoint(ones, rhs);
        for (double& v : rhs) v = -v;
        subtract_mean(rhs);

        const double scale = detail::norm2(rhs);
        if (scale > 0.0) {
            auto op = [this](const std::vector<double>& x, std::vector<double>& y) {
                apply_adjoint(x, y);
                subtract_mean(y);
            };
            auto prec = [this](const std::vector<double>& x, std::vector<double>& y) {
                fft_.solve_const_nondiv(mean_a_, x, y);
            };
            const KrylovResult kr =
                bicgstab(op, prec, rhs, rho, opt_.tol, opt_.max_iterations);
            if (!kr.converged)
                throw SolverError("invariant measure iteration stagnated at relative residual " +
                                      std::to_string(kr.relative_residual),
                                  kr.relative_residual, kr.iterations);
        }
        subtract_mean(rho);

        TorusField r = TorusField::scalar(n_);
        for (size_t i = 0; i < sz; ++i) r.data[i] = 1.0 + rho[i];
        if (!(r.min_value() > 0.0))
            throw std::runtime_error(
                "invariant measure has a nonpositive node value: resolution too coarse");
        const double mean = r.mean();
        for (double& v : r.data) v /= mean;

        std::vector<double> res(sz);
        apply_adjoint(r.data, res);
        residuals_["r"] = detail::norm2(res) / (scale > 0.0 ? scale : 1.0);
        r_ = std::move(r);
        return *r_;
    }

    /// Abar = int_Y A r by the periodic trapezoidal rule (node average).
    SymMatrix2 effective_coefficient() {
        if (abar_) return *abar_;
        const TorusField& r = invariant_measure();
        SymMatrix2 ab;
        const size_t sz = a11_.size();
        for (size_t i = 0; i < sz; ++i) {
            ab.a11 += a11_[i] * r.data[i];
            ab.a12 += a12_[i] * r.data[i];
            ab.a22 += a22_[i] * r.data[i];
        }
        ab.a11 /= static_cast<double>(sz);
        ab.a12 /= static_cast<double>(sz);
        ab.a22 /= static_cast<double>(sz);
        if (!(ab.eig_min() > 0.0))
            throw std::runtime_error("effective coefficient is not positive definite");
        abar_ = ab;
        return ab;
    }

    /// Mean-zero corrector v^{kl}: -A:D_h^2 v = a_kl - abar_kl. The (l,k)
    /// request returns the same field as (k,l).
    const TorusField& corrector(int k, int l) {
        check_index(k);
        check_index(l);
        if (k > l) std::swap(k, l);
        auto& slot = v_[slot_of(k, l)];
        if (slot) return *slot;

        const SymMatrix2 ab = effective_coefficient();
        const std::vector<double>& akl = (k == 1 && l == 1) ? a11_ : (k == 2 ? a22_ : a12_);
        const double abkl = (k == 1 && l == 1) ? ab.a11 : (k == 2 ? ab.a22 : ab.a12);
        std::vector<double> g(akl.size());
        for (size_t i = 0; i < g.size(); ++i) g[i] = akl[i] - abkl;

        std::string label = "v" + std::to_string(k) + std::to_string(l);
        slot = solve_periodic(std::move(g), label);
        return *slot;
    }

    /// c_j^{kl} = int_Y (A e_j . grad v^{kl}) r with central-difference
    /// gradients and node-average quadrature; symmetric in (k,l) by storage.
    CTensor c_tensor() {
        if (c_) return *c_;
        const TorusField& r = invariant_measure();
        CTensor c;
        double* out[3][2] = {{&c.c1_11, &c.c2_11}, {&c.c1_12, &c.c2_12}, {&c.c1_22, &c.c2_22}};
        const int pairs[3][2] = {{1, 1}, {1, 2}, {2, 2}};
        for (int q = 0; q < 3; ++q) {
            const TorusField& v = corrector(pairs[q][0], pairs[q][1]);
            std::vector<double> gx, gy;
            central_gradient(v.data, gx, gy);
            double s1 = 0.0, s2 = 0.0;
            for (size_t i = 0; i < gx.size(); ++i) {
                s1 += (a11_[i] * gx[i] + a12_[i] * gy[i]) * r.data[i];
                s2 += (a12_[i] * gx[i] + a22_[i] * gy[i]) * r.data[i];
            }
            *out[q][0] = s1 / static_cast<double>(gx.size());
            *out[q][1] = s2 / static_cast<double>(gx.size());
        }
        c_ = c;
        return c;
    }

    /// Mean-zero chi^{jkl}: -A:D_h^2 chi = A e_j . grad v^{kl} - c_j^{kl}.
    /// The right-hand side integrated against the invariant measure must
    /// vanish (it does exactly when c comes from c_tensor()).
    TorusField solve_chi(int j, int k, int l) {
        check_index(j);
        check_index(k);
        check_index(l);
        const TorusField& v = corrector(k, l);
        const double cjkl = c_tensor().at(j, k, l);
        std::vector<double> gx, gy, g(v.data.size());
        central_gradient(v.data, gx, gy);
        for (size_t i = 0; i < g.size(); ++i) {
            const double flux = (j == 1) ? a11_[i] * gx[i] + a12_[i] * gy[i]
                                         : a12_[i] * gx[i] + a22_[i] * gy[i];
            g[i] = flux - cjkl;
        }
        std::string label =
            "chi" + std::to_string(j) + std::to_string(k) + std::to_string(l);
        return solve_periodic(std::move(g), label);
    }

    /// Divergence-form transform: b_j = sum_i D_i (r a_ij), psi the stream
    /// function of b, A^div = rA + [[0, psi], [-psi, 0]]. The reconstruction
    /// is exact (column divergences at solver precision) whenever the
    /// discrete divergence of b vanishes, which the invariant-measure
    /// equation guarantees up to the cross-stencil commutator.
    std::pair<TorusField, TorusField> divergence_form_transform() {
        if (psi_) return {*psi_, *adiv_};
        const TorusField& r = invariant_measure();
        const size_t sz = a11_.size();
        std::vector<double> p11(sz), p12(sz), p22(sz);
        for (size_t i = 0; i < sz; ++i) {
            p11[i] = r.data[i] * a11_[i];
            p12[i] = r.data[i] * a12_[i];
            p22[i] = r.data[i] * a22_[i];
        }
        std::vector<double> d1p11, d2p11, d1p12, d2p12, d1p22, d2p22;
        central_gradient(p11, d1p11, d2p11);
        central_gradient(p12, d1p12, d2p12);
        central_gradient(p22, d1p22, d2p22);
        std::vector<double> b1(sz), b2(sz);
        for (size_t i = 0; i < sz; ++i) {
            b1[i] = d1p11[i] + d2p12[i];
            b2[i] = d1p12[i] + d2p22[i];
        }
        double m1 = 0.0, m2 = 0.0;
        for (size_t i = 0; i < sz; ++i) {
            m1 += b1[i];
            m2 += b2[i];
        }
        m1 /= static_cast<double>(sz);
        m2 /= static_cast<double>(sz);
        const double bscale = 1.0 + std::max(max_abs(b1), max_abs(b2));
        if (std::fabs(m1) > 1e-10 * bscale || std::fabs(m2) > 1e-10 * bscale)
            throw std::runtime_error(
                "divergence transform: b has nonzero mean (invariant measure is bad)");

        std::vector<double> psi_v = fft_.stream_function(b1, b2);

        TorusField psi = TorusField::scalar(n_);
        psi.data = std::move(psi_v);
        TorusField adiv = TorusField::matrix(n_);
        for (int j = 0; j < n_; ++j)
            for (int i = 0; i < n_; ++i) {
                const size_t idx = static_cast<size_t>(j) * n_ + i;
                adiv.at(i, j, 0) = p11[idx];
                adiv.at(i, j, 1) = p12[idx] + psi.data[idx];
                adiv.at(i, j, 2) = p12[idx] - psi.data[idx];
                adiv.at(i, j, 3) = p22[idx];
            }

        // column divergences of A^div, recorded as the transform residual
        std::vector<double> c1(sz), c2(sz), g1x, g1y, g2x, g2y;
        for (size_t i = 0; i < sz; ++i) c1[i] = p12[i] - psi.data[i];
        for (size_t i = 0; i < sz; ++i) c2[i] = p12[i] + psi.data[i];
        central_gradient(c1, g1x, g1y);
        central_gradient(c2, g2x, g2y);
        double coldiv = 0.0;
        for (size_t i = 0; i < sz; ++i) {
            coldiv = std::max(coldiv, std::fabs(d1p11[i] + g1y[i]));
            coldiv = std::max(coldiv, std::fabs(g2x[i] + d2p22[i]));
        }
        residuals_["coldiv"] = coldiv;

        psi_ = std::move(psi);
        adiv_ = std::move(adiv);
        return {*psi_, *adiv_};
    }

    /// int g r (node average), the solvability functional of the forward
    /// cell problems.
    double compatibility_integral(const std::vector<double>& g) {
        const TorusField& r = invariant_measure();
        double s = 0.0;
        for (size_t i = 0; i < g.size(); ++i) s += g[i] * r.data[i];
        return s / static_cast<double>(g.size());
    }

    /// Solve -A:D_h^2 u = g for the mean-zero periodic u. Checks the
    /// solvability integral against the invariant measure, deflates the exact
    /// defect, and runs BiCGSTAB with the Abar-FFT preconditioner (whose
    /// zeroed mean mode doubles as the per-iteration mean projection).
    TorusField solve_periodic(std::vector<double> g, const std::string& label) {
        const TorusField& r = invariant_measure();
        const double compat = compatibility_integral(g);
        const double gscale = 1.0 + max_abs(g);
        if (std::fabs(compat) > opt_.compat_tol * gscale)
            throw std::invalid_argument(
                label + ": right-hand side incompatible with the invariant measure "
                        "(weighted mean " +
                std::to_string(compat) + ")");
        double rr = 0.0;
        for (double x : r.data) rr += x * x;
        const double defect = compat * static_cast<double>(g.size()) / rr;
        for (size_t i = 0; i < g.size(); ++i) g[i] -= defect * r.data[i];

        const SymMatrix2 ab = effective_coefficient();
        std::vector<double> u(g.size(), 0.0);
        const double gnorm = detail::norm2(g);
        if (gnorm > 0.0) {
            auto op = [this](const std::vector<double>& x, std::vector<double>& y) {
                apply_forward(x, y);
            };
            auto prec = [this, ab](const std::vector<double>& x, std::vector<double>& y) {
                fft_.solve_const_nondiv(ab, x, y);
            };
            const KrylovResult kr = bicgstab(op, prec, g, u, opt_.tol, opt_.max_iterations);
            if (!kr.converged)
                throw SolverError(label + " solve stagnated at relative residual " +
                                      std::to_string(kr.relative_residual),
                                  kr.relative_residual, kr.iterations);
            residuals_[label] = kr.relative_residual;
        } else {
            residuals_[label] = 0.0;
        }
        subtract_mean(u);
        TorusField f = TorusField::scalar(n_);
        f.data = std::move(u);
        return f;
    }

    /// out = -A:D_h^2 v (narrow second differences, 4-point cross).
    void apply_forward(const std::vector<double>& v, std::vector<double>& out) const {
        const int n = n_;
        const double ih2 = static_cast<double>(n) * n;
        out.resize(v.size());
        for (int j = 0; j < n; ++j) {
            const int jm = TorusField::wrap(j - 1, n), jp = TorusField::wrap(j + 1, n);
            for (int i = 0; i < n; ++i) {
                const int im = TorusField::wrap(i - 1, n), ip = TorusField::wrap(i + 1, n);
                const size_t c = idx(i, j);
                const double dxx = (v[idx(ip, j)] - 2.0 * v[c] + v[idx(im, j)]) * ih2;
                const double dyy = (v[idx(i, jp)] - 2.0 * v[c] + v[idx(i, jm)]) * ih2;
                const double dxy = (v[idx(ip, jp)] - v[idx(ip, jm)] - v[idx(im, jp)] +
                                    v[idx(im, jm)]) *
                                   0.25 * ih2;
                out[c] = -(a11_[c] * dxx + 2.0 * a12_[c] * dxy + a22_[c] * dyy);
            }
        }
    }

    /// out = -D_h^2:(A r), the discrete adjoint of apply_forward.
    void apply_adjoint(const std::vector<double>& r, std::vector<double>& out) const {
        const int n = n_;
        const double ih2 = static_cast<double>(n) * n;
        const size_t sz = r.size();
        std::vector<double> p11(sz), p12(sz), p22(sz);
        for (size_t i = 0; i < sz; ++i) {
            p11[i] = a11_[i] * r[i];
            p12[i] = a12_[i] * r[i];
            p22[i] = a22_[i] * r[i];
        }
        out.resize(sz);
        for (int j = 0; j < n; ++j) {
            const int jm = TorusField::wrap(j - 1, n), jp = TorusField::wrap(j + 1, n);
            for (int i = 0; i < n; ++i) {
                const int im = TorusField::wrap(i - 1, n), ip = TorusField::wrap(i + 1, n);
                const size_t c = idx(i, j);
                const double dxx = (p11[idx(ip, j)] - 2.0 * p11[c] + p11[idx(im, j)]) * ih2;
                const double dyy = (p22[idx(i, jp)] - 2.0 * p22[c] + p22[idx(i, jm)]) * ih2;
                const double dxy = (p12[idx(ip, jp)] - p12[idx(ip, jm)] - p12[idx(im, jp)] +
                                    p12[idx(im, jm)]) *
                                   0.25 * ih2;
                out[c] = -(dxx + 2.0 * dxy + dyy);
            }
        }
    }

    /// Periodic central-difference gradient of a node field.
    void central_gradient(const std::vector<double>& v, std::vector<double>& gx,
                          std::vector<double>& gy) const {
        const int n = n_;
        const double ih = 0.5 * n;
        gx.resize(v.size());
        gy.resize(v.size());
        for (int j = 0; j < n; ++j) {
            const int jm = TorusField::wrap(j - 1, n), jp = TorusField::wrap(j + 1, n);
            for (int i = 0; i < n; ++i) {
                const int im = TorusField::wrap(i - 1, n), ip = TorusField::wrap(i + 1, n);
                const size_t c = idx(i, j);
                gx[c] = (v[idx(ip, j)] - v[idx(im, j)]) * ih;
                gy[c] = (v[idx(i, jp)] - v[idx(i, jm)]) * ih;
            }
        }
    }

 private:
    size_t idx(int i, int j) const { return static_cast<size_t>(j) * n_ + i; }
    static void check_index(int k) {
        if (k < 1 || k > 2) throw std::invalid_argument("index must be 1 or 2");
    }
    static int slot_of(int k, int l) { return (k == 1 && l == 1) ? 0 : (l == 2 && k == 1 ? 1 : 2); }
    static void subtract_mean(std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        for (double& x : v) x -= m;
    }
    static double max_abs(const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::fabs(x));
        return m;
    }

    CoefficientSpec spec_;
    int n_;
    CellOptions opt_;
    SpectralTorus fft_;
    std::vector<double> a11_, a12_, a22_;
    SymMatrix2 mean_a_;
    std::optional<TorusField> r_;
    std::optional<SymMatrix2> abar_;
    std::array<std::optional<TorusField>, 3> v_;
    std::optional<CTensor> c_;
    std::optional<TorusField> psi_, adiv_;
    std::map<std::string, double> residuals_;
};

/// Everything the torus engine produces for one coefficient, bundled.
struct CellSolution {
    int n = 0;
    TorusField r;
    SymMatrix2 abar;
    TorusField v11, v12, v22;
    CTensor c;
    Classification cls = Classification::c_good;
    std::array<TorusField, 6> chi;  // (j,k,l) in order 111, 112, 122, 211, 212, 222
    TorusField psi;
    TorusField adiv;
    std::map<std::string, double> residuals;

    static constexpr std::array<std::array<int, 3>, 6> chi_indices{
        {{1, 1, 1}, {1, 1, 2}, {1, 2, 2}, {2, 1, 1}, {2, 1, 2}, {2, 2, 2}}};
};

inline CellSolution solve_cell(const CoefficientSpec& a, int n, CellOptions opt = {}) {
    CellEngine eng(a, n, opt);
    CellSolution s;
    s.n = n;
    s.r = eng.invariant_measure();
    s.abar = eng.effective_coefficient();
    s.v11 = eng.corrector(1, 1);
    s.v12 = eng.corrector(1, 2);
    s.v22 = eng.corrector(2, 2);
    s.c = eng.c_tensor();
    s.cls = classify(s.c, std::max(s.abar.max_abs(), 1e-300));
    for (size_t q = 0; q < s.chi_indices.size(); ++q) {
        const auto& jkl = s.chi_indices[q];
        s.chi[q] = eng.solve_chi(jkl[0], jkl[1], jkl[2]);
    }
    auto [psi, adiv] = eng.divergence_form_transform();
    s.psi = psi;
    s.adiv = adiv;
    s.residuals = eng.residuals();
    return s;
}

/// Spec-level free functions.
inline TorusField solve_invariant_measure(const CoefficientSpec& a, int n,
                                          CellOptions opt = {}) {
    CellEngine eng(a, n, opt);
    return eng.invariant_measure();
}

inline SymMatrix2 effective_coefficient(const CoefficientSpec& a, const TorusField& r) {
    if (r.kind != FieldKind::scalar || r.n < 1)
        throw std::invalid_argument("effective_coefficient: r must be a scalar torus field");
    SymMatrix2 ab;
    const int n = r.n;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const SymMatrix2 m = a.eval(static_cast<double>(i) / n, static_cast<double>(j) / n);
            const double w = r.at(i, j);
            ab.a11 += m.a11 * w;
            ab.a12 += m.a12 * w;
            ab.a22 += m.a22 * w;
        }
    const double sz = static_cast<double>(n) * n;
    ab.a11 /= sz;
    ab.a12 /= sz;
    ab.a22 /= sz;
    return ab;
}

}  // namespace homognd

#endif  // HOMOGND_CELL_HPP
