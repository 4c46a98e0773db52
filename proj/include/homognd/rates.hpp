#ifndef HOMOGND_RATES_HPP
#define HOMOGND_RATES_HPP

#include <atomic>
#include <filesystem>
#include <mutex>
#include <thread>

#include "homognd/cell.hpp"
#include "homognd/dirichlet.hpp"
#include "homognd/io_grid.hpp"
#include "homognd/norms.hpp"
#include "homognd/version.hpp"

namespace homognd {

// ---------------------------------------------------------------------------
// functionals and fits

enum class Functional { plain_linf, plain_w1p, e0_inf, e1_p, e2_p, theta_w12 };

inline std::string functional_name(Functional f) {
    switch (f) {
        case Functional::plain_linf: return "plainLinf";
        case Functional::plain_w1p: return "plainW1p";
        case Functional::e0_inf: return "E0inf";
        case Functional::e1_p: return "E1p";
        case Functional::e2_p: return "E2p";
        case Functional::theta_w12: return "thetaW1p";
    }
    return "?";
}

inline Functional functional_by_name(const std::string& s) {
    for (Functional f : {Functional::plain_linf, Functional::plain_w1p, Functional::e0_inf,
                         Functional::e1_p, Functional::e2_p, Functional::theta_w12})
        if (functional_name(f) == s) return f;
    throw std::invalid_argument(
        "unknown functional '" + s +
        "' (valid: plainLinf, plainW1p, E0inf, E1p, E2p, thetaW1p)");
}

/// True for the functionals measured per L^p exponent.
inline bool functional_has_p(Functional f) {
    return f == Functional::plain_w1p || f == Functional::e1_p || f == Functional::e2_p ||
           f == Functional::theta_w12;
}

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::vector<double> points_used;  // epsilon values entering the fit
};

/// Least-squares line through (log eps, log E); the slope is the empirical
/// convergence order.
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& samples) {
    if (samples.size() < 3) throw std::invalid_argument("fit_rate: at least 3 samples required");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [eps, e] : samples) {
        if (!(e > 0.0))
            throw std::invalid_argument(
                "fit_rate: nonpositive functional value (exact cancellation?); report it "
                "separately instead of fitting");
        if (!(eps > 0.0)) throw std::invalid_argument("fit_rate: epsilon must be positive");
        const double x = std::log(eps), y = std::log(e);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(samples.size());
    const double det = n * sxx - sx * sx;
    if (std::fabs(det) < 1e-14 * (1.0 + sxx) * n)
        throw std::invalid_argument("fit_rate: abscissae are constant");
    RateFit fit;
    fit.slope = (n * sxy - sx * sy) / det;
    fit.intercept = (sy * sxx - sx * sxy) / det;
    double ss_res = 0, ss_tot = 0;
    const double mean_y = sy / n;
    for (const auto& [eps, e] : samples) {
        const double x = std::log(eps), y = std::log(e);
        const double yhat = fit.intercept + fit.slope * x;
        ss_res += (y - yhat) * (y - yhat);
        ss_tot += (y - mean_y) * (y - mean_y);
        fit.points_used.push_back(eps);
    }
    fit.r_squared = (ss_tot > 0.0) ? std::max(0.0, 1.0 - ss_res / ss_tot) : 1.0;
    return fit;
}

/// plainLinf = sup|u_eps - u|, E0inf = sup|u_eps - u + 2 eps z| (sign as the
/// paper prints it).
inline std::pair<double, double> error_sup(const GridFunction& u_eps,
                                           const std::vector<double>& u,
                                           const std::vector<double>& z, double eps) {
    if (u.size() != u_eps.v.size() || z.size() != u_eps.v.size())
        throw std::invalid_argument("error_sup: grid mismatch");
    double plain = 0.0, corrected = 0.0;
    for (size_t q = 0; q < u.size(); ++q) {
        const double d = u_eps.v[q] - u[q];
        plain = std::max(plain, std::fabs(d));
        corrected = std::max(corrected, std::fabs(d + 2.0 * eps * z[q]));
    }
    return {plain, corrected};
}

/// L^p norm of grad u_eps - grad u + 2 eps grad z
///                - eps sum_ij grad v^{ij}(./eps) d2_ij u  (Euclidean pointwise).
/// vg components: {v11_1, v11_2, v12_1, v12_2, v22_1, v22_2} at x/eps;
/// d2u components: {u11, u12, u22}.
inline double error_grad(const Gradient& due, const std::array<std::vector<double>, 2>& gu,
                         const std::array<std::vector<double>, 2>& gz,
                         const std::array<std::vector<double>, 6>& vg,
                         const std::array<std::vector<double>, 3>& d2u, double eps, double p,
                         const NodeMask& mask, int m) {
    const size_t nn = due.d1.size();
    if (gu[0].size() != nn || gz[0].size() != nn || vg[0].size() != nn || d2u[0].size() != nn)
        throw std::invalid_argument("error_grad: grid mismatch");
    std::vector<double> mag(nn);
    for (size_t q = 0; q < nn; ++q) {
        const double s1 = vg[0][q] * d2u[0][q] + 2.0 * vg[2][q] * d2u[1][q] +
                          vg[4][q] * d2u[2][q];
        const double s2 = vg[1][q] * d2u[0][q] + 2.0 * vg[3][q] * d2u[1][q] +
                          vg[5][q] * d2u[2][q];
        const double r1 = due.d1[q] - gu[0][q] + 2.0 * eps * gz[0][q] - eps * s1;
        const double r2 = due.d2[q] - gu[1][q] + 2.0 * eps * gz[1][q] - eps * s2;
        mag[q] = std::sqrt(r1 * r1 + r2 * r2);
    }
    return lp_norm(mag, m, p, mask);
}

/// L^p norm of D2 u_eps - D2 u - sum_ij D2 v^{ij}(./eps) d2_ij u (Frobenius
/// pointwise). vh components: nine fields ordered v11_{11,12,22},
/// v12_{11,12,22}, v22_{11,12,22} at x/eps.
inline double error_hess(const Hessian& hue, const std::array<std::vector<double>, 3>& d2u,
                         const std::array<std::vector<double>, 9>& vh, double p,
                         const NodeMask& mask, int m) {
    const size_t nn = hue.d11.size();
    if (d2u[0].size() != nn || vh[0].size() != nn)
        throw std::invalid_argument("error_hess: grid mismatch");
    std::vector<double> mag(nn);
    for (size_t q = 0; q < nn; ++q) {
        double r[3];
        for (int e = 0; e < 3; ++e) {
            const double osc = vh[e][q] * d2u[0][q] + 2.0 * vh[3 + e][q] * d2u[1][q] +
                               vh[6 + e][q] * d2u[2][q];
            const double hq = (e == 0) ? hue.d11[q] : (e == 1 ? hue.d12[q] : hue.d22[q]);
            r[e] = hq - d2u[e][q] - osc;
        }
        mag[q] = std::sqrt(r[0] * r[0] + 2.0 * r[1] * r[1] + r[2] * r[2]);
    }
    return lp_norm(mag, m, p, mask);
}

// ---------------------------------------------------------------------------
// experiment configuration and report

struct OracleToggles {
    bool r = true;  // closed-form invariant measure when available
    bool v = true;  // closed-form correctors (and with them the c-tensor)
    bool u = true;  // closed-form homogenized solution when available
    bool z = true;  // closed-form z when available
};

struct ExperimentConfig {
    std::string label = "custom";
    std::string coefficient = "cbad";  // builtin name or path to a sampled matrix field
    std::string rhs = "sinsin";
    Backend backend = Backend::fd_nondiv;
    std::vector<int> eps_inv = {5, 8, 10, 16, 20, 32, 40};
    std::vector<double> ps = {2, 3, 4, 5};
    int m_rule = 16;   // M = m_rule / epsilon
    int cell_n = 128;  // torus resolution for computed cell objects
    int fine_m = 1024; // grid for the numeric homogenized reference
    std::vector<Functional> functionals = {Functional::plain_linf, Functional::e0_inf};
    OracleToggles oracles;
    int jobs = 0;  // concurrent epsilon jobs; 0 = hardware concurrency
    unsigned long seed = 0;  // synthetic-noise self-tests only
    std::string output_dir;
};

struct FunctionalValue {
    Functional kind;
    double p = 0.0;  // 0 for sup-norm functionals
    double value = 0.0;
};
struct EpsSample {
    int eps_inv = 0;
    int m = 0;
    std::vector<FunctionalValue> values;
};
struct FitEntry {
    Functional kind;
    double p = 0.0;
    RateFit fit;
};
struct RateReport {
    ExperimentConfig config;
    std::vector<EpsSample> samples;                            // ordered by decreasing epsilon
    std::vector<FitEntry> fits;                                // 4 smallest epsilons
    std::vector<std::string> zero_samples;                     // exact cancellations, not fitted
    std::vector<std::pair<std::string, std::string>> provenance;
};

// ---------------------------------------------------------------------------
// experiment data: every accessor a per-epsilon job needs, resolved once

namespace detail {

using A2 = std::array<double, 2>;
using A3 = std::array<double, 3>;
using A6 = std::array<double, 6>;
using A9 = std::array<double, 9>;

struct ExperimentData {
    ExperimentConfig cfg;
    CoefficientSpec spec;
    RhsPack rhs;
    SymMatrix2 abar;
    CTensor c;
    std::function<double(double, double)> r_at;          // at y
    std::function<A3(double, double)> v_at;              // {v11, v12, v22} at y
    std::function<A6(double, double)> vgrad_at;          // at y
    std::function<A9(double, double)> vhess_at;          // at y
    std::function<Matrix22(double, double)> adiv_at;     // at y
    std::function<double(double, double)> u_at;          // at x
    std::function<A2(double, double)> ugrad_at;          // at x
    std::function<A3(double, double)> uhess_at;          // at x
    bool z_zero = false;
    bool z_closed = false;
    std::function<double(double, double)> z_at;          // closed z
    std::function<A2(double, double)> zgrad_at;
    std::function<double(double, double)> h_at;          // source of the z problem
    std::vector<std::pair<std::string, std::string>> provenance;
};

inline std::function<double(double, double)> interp_torus(std::shared_ptr<TorusField> f,
                                                          int comp = 0) {
    return [f, comp](double y1, double y2) { return sample_periodic(*f, y1, y2, comp); };
}

inline std::shared_ptr<TorusField> torus_dx(const TorusField& f) {
    auto g = std::make_shared<TorusField>(TorusField::scalar(f.n));
    const double ih = 0.5 * f.n;
    for (int j = 0; j < f.n; ++j)
        for (int i = 0; i < f.n; ++i)
            g->at(i, j) = (f.at_wrapped(i + 1, j) - f.at_wrapped(i - 1, j)) * ih;
    return g;
}
inline std::shared_ptr<TorusField> torus_dy(const TorusField& f) {
    auto g = std::make_shared<TorusField>(TorusField::scalar(f.n));
    const double ih = 0.5 * f.n;
    for (int j = 0; j < f.n; ++j)
        for (int i = 0; i < f.n; ++i)
            g->at(i, j) = (f.at_wrapped(i, j + 1) - f.at_wrapped(i, j - 1)) * ih;
    return g;
}
inline std::shared_ptr<TorusField> torus_dxx(const TorusField& f) {
    auto g = std::make_shared<TorusField>(TorusField::scalar(f.n));
    const double ih2 = static_cast<double>(f.n) * f.n;
    for (int j = 0; j < f.n; ++j)
        for (int i = 0; i < f.n; ++i)
            g->at(i, j) = (f.at_wrapped(i + 1, j) - 2.0 * f.at(i, j) + f.at_wrapped(i - 1, j)) * ih2;
    return g;
}
inline std::shared_ptr<TorusField> torus_dyy(const TorusField& f) {
    auto g = std::make_shared<TorusField>(TorusField::scalar(f.n));
    const double ih2 = static_cast<double>(f.n) * f.n;
    for (int j = 0; j < f.n; ++j)
        for (int i = 0; i < f.n; ++i)
            g->at(i, j) = (f.at_wrapped(i, j + 1) - 2.0 * f.at(i, j) + f.at_wrapped(i, j - 1)) * ih2;
    return g;
}
inline std::shared_ptr<TorusField> torus_dxy(const TorusField& f) {
    auto g = std::make_shared<TorusField>(TorusField::scalar(f.n));
    const double ih2 = 0.25 * static_cast<double>(f.n) * f.n;
    for (int j = 0; j < f.n; ++j)
        for (int i = 0; i < f.n; ++i)
            g->at(i, j) = (f.at_wrapped(i + 1, j + 1) - f.at_wrapped(i + 1, j - 1) -
                           f.at_wrapped(i - 1, j + 1) + f.at_wrapped(i - 1, j - 1)) *
                          ih2;
    return g;
}

/// Does the c-tensor have the builtin c-bad structure (c1^11 = c1^22 the only
/// entries) with a scalar effective matrix? Then h = -(c1^11/abar) d1 f for
/// any u solving -Abar:D^2 u = f.
inline bool cbad_pattern(const CTensor& c, const SymMatrix2& abar) {
    const double scale = c.max_abs();
    if (!(scale > 0.0)) return false;
    const double iso = std::max(std::fabs(abar.a12), std::fabs(abar.a11 - abar.a22));
    return std::fabs(c.c2_11) <= 1e-4 * scale && std::fabs(c.c2_12) <= 1e-4 * scale &&
           std::fabs(c.c2_22) <= 1e-4 * scale && std::fabs(c.c1_12) <= 1e-4 * scale &&
           std::fabs(c.c1_11 - c.c1_22) <= 1e-3 * scale &&
           iso <= 1e-6 * std::max(abar.max_abs(), 1e-300);
}

inline ExperimentData prepare_experiment(const ExperimentConfig& cfg) {
    if (cfg.eps_inv.empty()) throw std::invalid_argument("experiment: epsilon list is empty");
    if (cfg.functionals.empty())
        throw std::invalid_argument("experiment: no functionals requested");
    for (double p : cfg.ps)
        if (!(p > 1.0) || !std::isfinite(p))
            throw std::invalid_argument("experiment: p values must lie in (1, inf)");
    if (cfg.m_rule < 16)
        throw std::invalid_argument("experiment: m_rule >= 16 (resolution rule)");

    ExperimentData d;
    d.cfg = cfg;
    d.rhs = builtin_rhs(cfg.rhs);

    bool have_pack = false;
    CoefficientPack pack;
    try {
        pack = coefficient_by_name(cfg.coefficient);
        have_pack = true;
    } catch (const std::invalid_argument&) {
        // not a builtin: treat as a path to a sampled matrix field
        if (!std::filesystem::exists(cfg.coefficient))
            throw std::invalid_argument(
                "unknown coefficient '" + cfg.coefficient +
                "' (valid: cbad, cgood, constant-identity, or a path to a sampled grid file)");
        d.spec = CoefficientSpec::from_samples(cfg.coefficient,
                                               load_torus_field(cfg.coefficient));
    }
    if (have_pack) d.spec = pack.spec;
    d.provenance.emplace_back("coefficient", cfg.coefficient);
    d.provenance.emplace_back("rhs", cfg.rhs);
    d.provenance.emplace_back("backend", backend_name(cfg.backend));

    const bool closed_cell = have_pack && cfg.oracles.r && cfg.oracles.v;
    std::shared_ptr<CellSolution> cell;
    if (!closed_cell) {
        cell = std::make_shared<CellSolution>(solve_cell(d.spec, cfg.cell_n));
    }

    // r, V (values/derivatives), A^div, Abar, c
    if (have_pack && cfg.oracles.r) {
        auto r = pack.r;
        d.r_at = [r](double y1, double y2) { return r.val(y1, y2); };
        d.provenance.emplace_back("r", "closed-form");
    } else {
        auto rf = std::make_shared<TorusField>(cell->r);
        d.r_at = interp_torus(rf);
        d.provenance.emplace_back("r", "computed (N=" + std::to_string(cfg.cell_n) + ")");
    }
    if (have_pack && cfg.oracles.v) {
        d.abar = pack.abar;
        d.c = pack.c;
        const SymMatrixForm v = pack.V;
        d.v_at = [v](double y1, double y2) {
            return A3{v.e11.val(y1, y2), v.e12.val(y1, y2), v.e22.val(y1, y2)};
        };
        d.vgrad_at = [v](double y1, double y2) {
            return A6{v.e11.d1(y1, y2), v.e11.d2(y1, y2), v.e12.d1(y1, y2),
                      v.e12.d2(y1, y2), v.e22.d1(y1, y2), v.e22.d2(y1, y2)};
        };
        d.vhess_at = [v](double y1, double y2) {
            return A9{v.e11.d11(y1, y2), v.e11.d12(y1, y2), v.e11.d22(y1, y2),
                      v.e12.d11(y1, y2), v.e12.d12(y1, y2), v.e12.d22(y1, y2),
                      v.e22.d11(y1, y2), v.e22.d12(y1, y2), v.e22.d22(y1, y2)};
        };
        d.provenance.emplace_back("V", "closed-form");
    } else {
        d.abar = cell->abar;
        d.c = cell->c;
        auto v11 = std::make_shared<TorusField>(cell->v11);
        auto v12 = std::make_shared<TorusField>(cell->v12);
        auto v22 = std::make_shared<TorusField>(cell->v22);
        std::array<std::shared_ptr<TorusField>, 6> g = {torus_dx(*v11), torus_dy(*v11),
                                                        torus_dx(*v12), torus_dy(*v12),
                                                        torus_dx(*v22), torus_dy(*v22)};
        std::array<std::shared_ptr<TorusField>, 9> hss = {
            torus_dxx(*v11), torus_dxy(*v11), torus_dyy(*v11),
            torus_dxx(*v12), torus_dxy(*v12), torus_dyy(*v12),
            torus_dxx(*v22), torus_dxy(*v22), torus_dyy(*v22)};
        d.v_at = [v11, v12, v22](double y1, double y2) {
            return A3{sample_periodic(*v11, y1, y2), sample_periodic(*v12, y1, y2),
                      sample_periodic(*v22, y1, y2)};
        };
        d.vgrad_at = [g](double y1, double y2) {
            A6 out;
            for (int q = 0; q < 6; ++q) out[q] = sample_periodic(*g[q], y1, y2);
            return out;
        };
        d.vhess_at = [hss](double y1, double y2) {
            A9 out;
            for (int q = 0; q < 9; ++q) out[q] = sample_periodic(*hss[q], y1, y2);
            return out;
        };
        d.provenance.emplace_back("V", "computed (N=" + std::to_string(cfg.cell_n) + ")");
    }
    if (cfg.backend == Backend::fem_div) {
        if (have_pack && cfg.oracles.r && cfg.oracles.v) {
            d.adiv_at = [pack](double y1, double y2) { return pack.adiv(y1, y2); };
        } else {
            auto adiv = std::make_shared<TorusField>(cell->adiv);
            d.adiv_at = [adiv](double y1, double y2) {
                return Matrix22{sample_periodic(*adiv, y1, y2, 0), sample_periodic(*adiv, y1, y2, 1),
                                sample_periodic(*adiv, y1, y2, 2), sample_periodic(*adiv, y1, y2, 3)};
            };
        }
    }

    // homogenized u and derivatives
    const bool u_closed = d.rhs.has_u && cfg.oracles.u;
    if (u_closed) {
        const ScalarForm u = d.rhs.u;
        d.u_at = [u](double x1, double x2) { return u.val(x1, x2); };
        d.ugrad_at = [u](double x1, double x2) { return A2{u.d1(x1, x2), u.d2(x1, x2)}; };
        d.uhess_at = [u](double x1, double x2) {
            return A3{u.d11(x1, x2), u.d12(x1, x2), u.d22(x1, x2)};
        };
        d.provenance.emplace_back("u", "closed-form");
    } else {
        auto fine = std::make_shared<GridFunction>(
            solve_homogenized(d.abar, d.rhs.f.val, cfg.fine_m));
        auto fg = std::make_shared<Gradient>(discrete_gradient(*fine));
        auto fh = std::make_shared<Hessian>(discrete_hessian(*fine));
        auto as_grid = [m = cfg.fine_m](const std::vector<double>& v) {
            GridFunction g = GridFunction::zero(m);
            g.v = v;
            g.dirichlet = false;
            return std::make_shared<GridFunction>(std::move(g));
        };
        auto g1 = as_grid(fg->d1), g2 = as_grid(fg->d2);
        auto h11 = as_grid(fh->d11), h12 = as_grid(fh->d12), h22 = as_grid(fh->d22);
        d.u_at = [fine](double x1, double x2) { return sample_grid(*fine, x1, x2); };
        d.ugrad_at = [g1, g2](double x1, double x2) {
            return A2{sample_grid(*g1, x1, x2), sample_grid(*g2, x1, x2)};
        };
        d.uhess_at = [h11, h12, h22](double x1, double x2) {
            return A3{sample_grid(*h11, x1, x2), sample_grid(*h12, x1, x2),
                      sample_grid(*h22, x1, x2)};
        };
        d.provenance.emplace_back("u", "computed (M=" + std::to_string(cfg.fine_m) + ")");
    }

    // z and its source h
    const double c_scale = std::max(d.abar.max_abs(), 1e-300);
    if (d.c.max_abs() <= 1e-5 * c_scale) {
        d.z_zero = true;
        d.provenance.emplace_back("z", "zero (c-tensor vanishes)");
    } else if (d.rhs.has_z && cfg.oracles.z) {
        d.z_closed = true;
        const ScalarForm z = d.rhs.z;
        d.z_at = [z](double x1, double x2) { return z.val(x1, x2); };
        d.zgrad_at = [z](double x1, double x2) { return A2{z.d1(x1, x2), z.d2(x1, x2)}; };
        d.provenance.emplace_back("z", "closed-form");
    } else {
        if (cbad_pattern(d.c, d.abar)) {
            const double w = -d.c.c1_11 / d.abar.a11;
            const ScalarForm f = d.rhs.f;
            d.h_at = [w, f](double x1, double x2) { return w * f.d1(x1, x2); };
            d.provenance.emplace_back("h", "gradient shortcut (c1^11 = c1^22 pattern)");
        } else if (d.rhs.has_u && cfg.oracles.u && d.rhs.u.has_third()) {
            const ScalarForm u = d.rhs.u;
            const CTensor c = d.c;
            d.h_at = [u, c](double x1, double x2) {
                return c.c1_11 * u.d111(x1, x2) +
                       (2.0 * c.c1_12 + c.c2_11) * u.d112(x1, x2) +
                       (c.c1_22 + 2.0 * c.c2_12) * u.d122(x1, x2) +
                       c.c2_22 * u.d222(x1, x2);
            };
            d.provenance.emplace_back("h", "closed-form third derivatives");
        } else {
            // numeric third derivatives of a fine homogenized solve
            auto fine = std::make_shared<GridFunction>(
                solve_homogenized(d.abar, d.rhs.f.val, cfg.fine_m));
            auto t3 = std::make_shared<ThirdDerivatives>(discrete_third_derivatives(*fine));
            auto as_grid = [m = cfg.fine_m](const std::vector<double>& v) {
                GridFunction g = GridFunction::zero(m);
                g.v = v;
                g.dirichlet = false;
                return std::make_shared<GridFunction>(std::move(g));
            };
            auto d111 = as_grid(t3->d111), d112 = as_grid(t3->d112);
            auto d122 = as_grid(t3->d122), d222 = as_grid(t3->d222);
            const CTensor c = d.c;
            d.h_at = [=](double x1, double x2) {
                return c.c1_11 * sample_grid(*d111, x1, x2) +
                       (2.0 * c.c1_12 + c.c2_11) * sample_grid(*d112, x1, x2) +
                       (c.c1_22 + 2.0 * c.c2_12) * sample_grid(*d122, x1, x2) +
                       c.c2_22 * sample_grid(*d222, x1, x2);
            };
            d.provenance.emplace_back("h", "numeric third derivatives (M=" +
                                               std::to_string(cfg.fine_m) + ")");
        }
        d.provenance.emplace_back("z", "computed per grid");
    }
    d.provenance.emplace_back("library", library_version);
    return d;
}

/// One epsilon of the sweep: the oscillatory solve plus every requested
/// functional.
inline EpsSample run_epsilon(const ExperimentData& d, int k) {
    const Epsilon eps = Epsilon::of_inverse(k);
    const int m = d.cfg.m_rule * k;
    const double ke = static_cast<double>(k);
    const int np = m + 1;
    const size_t nn = static_cast<size_t>(np) * np;
    const double h = 1.0 / m;

    EpsSample sample;
    sample.eps_inv = k;
    sample.m = m;

    bool need_ueps = false, need_theta = false;
    for (Functional f : d.cfg.functionals)
        (f == Functional::theta_w12 ? need_theta : need_ueps) = true;

    GridFunction ue;
    std::vector<double> u_nodal, z_nodal;
    std::array<std::vector<double>, 2> zg;
    GridFunction z_solved;
    const bool need_z =
        std::count(d.cfg.functionals.begin(), d.cfg.functionals.end(), Functional::e0_inf) ||
        std::count(d.cfg.functionals.begin(), d.cfg.functionals.end(), Functional::e1_p);

    if (need_ueps) {
        EpsProblem p;
        p.A = d.spec;
        p.f = d.rhs.f.val;
        p.epsilon = eps;
        p.backend = d.cfg.backend;
        p.r = d.r_at;
        p.adiv = d.adiv_at;
        ue = solve_eps(p, m);
        u_nodal.resize(nn);
        for (int j = 0; j <= m; ++j)
            for (int i = 0; i <= m; ++i)
                u_nodal[static_cast<size_t>(j) * np + i] = d.u_at(i * h, j * h);
        if (need_z) {
            z_nodal.assign(nn, 0.0);
            zg[0].assign(nn, 0.0);
            zg[1].assign(nn, 0.0);
            if (d.z_closed) {
                for (int j = 0; j <= m; ++j)
                    for (int i = 0; i <= m; ++i) {
                        const size_t q = static_cast<size_t>(j) * np + i;
                        z_nodal[q] = d.z_at(i * h, j * h);
                        const A2 g = d.zgrad_at(i * h, j * h);
                        zg[0][q] = g[0];
                        zg[1][q] = g[1];
                    }
            } else if (!d.z_zero) {
                z_solved = solve_z(d.abar, d.h_at, m);
                z_nodal = z_solved.v;
                const Gradient g = discrete_gradient(z_solved);
                zg[0] = g.d1;
                zg[1] = g.d2;
            }
        }
    }

    const NodeMask full = NodeMask::full(m);
    for (Functional f : d.cfg.functionals) {
        switch (f) {
            case Functional::plain_linf:
            case Functional::e0_inf: {
                if (z_nodal.empty()) z_nodal.assign(nn, 0.0);
                const auto [plain, corrected] = error_sup(ue, u_nodal, z_nodal, eps.value());
                sample.values.push_back(
                    {f, 0.0, f == Functional::plain_linf ? plain : corrected});
                break;
            }
            case Functional::plain_w1p: {
                const Gradient due = discrete_gradient(ue);
                std::vector<double> diff(nn), gmag(nn);
                for (int j = 0; j <= m; ++j)
                    for (int i = 0; i <= m; ++i) {
                        const size_t q = static_cast<size_t>(j) * np + i;
                        diff[q] = ue.v[q] - u_nodal[q];
                        const A2 gu = d.ugrad_at(i * h, j * h);
                        const double g1 = due.d1[q] - gu[0], g2 = due.d2[q] - gu[1];
                        gmag[q] = std::sqrt(g1 * g1 + g2 * g2);
                    }
                for (double p : d.cfg.ps)
                    sample.values.push_back({f, p, w1p_norm(diff, gmag, m, p, full)});
                break;
            }
            case Functional::e1_p: {
                const Gradient due = discrete_gradient(ue);
                std::array<std::vector<double>, 2> gu;
                std::array<std::vector<double>, 6> vg;
                std::array<std::vector<double>, 3> d2u;
                gu[0].resize(nn);
                gu[1].resize(nn);
                for (auto& v : vg) v.resize(nn);
                for (auto& v : d2u) v.resize(nn);
                for (int j = 0; j <= m; ++j)
                    for (int i = 0; i <= m; ++i) {
                        const size_t q = static_cast<size_t>(j) * np + i;
                        const double x1 = i * h, x2 = j * h;
                        const A2 g = d.ugrad_at(x1, x2);
                        gu[0][q] = g[0];
                        gu[1][q] = g[1];
                        const A6 vgq = d.vgrad_at(x1 * ke, x2 * ke);
                        for (int e = 0; e < 6; ++e) vg[e][q] = vgq[e];
                        const A3 hq = d.uhess_at(x1, x2);
                        for (int e = 0; e < 3; ++e) d2u[e][q] = hq[e];
                    }
                for (double p : d.cfg.ps)
                    sample.values.push_back(
                        {f, p, error_grad(due, gu, zg, vg, d2u, eps.value(), p, full, m)});
                break;
            }
            case Functional::e2_p: {
                const Hessian hue = discrete_hessian(ue);
                std::array<std::vector<double>, 3> d2u;
                std::array<std::vector<double>, 9> vh;
                for (auto& v : d2u) v.resize(nn);
                for (auto& v : vh) v.resize(nn);
                for (int j = 0; j <= m; ++j)
                    for (int i = 0; i <= m; ++i) {
                        const size_t q = static_cast<size_t>(j) * np + i;
                        const double x1 = i * h, x2 = j * h;
                        const A3 hq = d.uhess_at(x1, x2);
                        for (int e = 0; e < 3; ++e) d2u[e][q] = hq[e];
                        const A9 vhq = d.vhess_at(x1 * ke, x2 * ke);
                        for (int e = 0; e < 9; ++e) vh[e][q] = vhq[e];
                    }
                // one-cell strip excluded: one-sided wall Hessians would
                // pollute the p-norm
                const NodeMask strip = NodeMask::interior(m, 1);
                for (double p : d.cfg.ps)
                    sample.values.push_back({f, p, error_hess(hue, d2u, vh, p, strip, m)});
                break;
            }
            case Functional::theta_w12: {
                auto v3 = d.v_at;
                auto v_at = [v3](double y1, double y2) {
                    const A3 v = v3(y1, y2);
                    return SymMatrix2{v[0], v[1], v[2]};
                };
                auto d2u_at = d.uhess_at;
                const GridFunction theta =
                    solve_boundary_corrector(d.spec, eps, v_at, d2u_at, m);
                const Gradient gt = discrete_gradient(theta);
                std::vector<double> gmag(nn);
                for (size_t q = 0; q < nn; ++q)
                    gmag[q] = std::sqrt(gt.d1[q] * gt.d1[q] + gt.d2[q] * gt.d2[q]);
                for (double p : d.cfg.ps)
                    sample.values.push_back(
                        {f, p, eps.value() * w1p_norm(theta.v, gmag, m, p, full)});
                break;
            }
        }
    }
    return sample;
}

}  // namespace detail

/// Run the full sweep: resolve oracles and cell objects once, solve every
/// epsilon (concurrently up to cfg.jobs), evaluate the requested functionals,
/// and fit slopes on the four smallest epsilons. Deterministic: the report is
/// bitwise independent of the job count.
inline RateReport run_experiment(const ExperimentConfig& cfg) {
    const detail::ExperimentData data = detail::prepare_experiment(cfg);

    std::vector<int> order = cfg.eps_inv;
    std::sort(order.begin(), order.end());
    order.erase(std::unique(order.begin(), order.end()), order.end());
    if (order.front() < 1) throw std::invalid_argument("experiment: epsilon must lie in (0,1]");

    RateReport report;
    report.config = cfg;
    report.config.eps_inv = order;
    report.provenance = data.provenance;
    report.samples.resize(order.size());

    unsigned jobs = cfg.jobs > 0 ? static_cast<unsigned>(cfg.jobs)
                                 : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, order.size());

    std::atomic<size_t> next{0};
    std::mutex err_mutex;
    std::string first_error;
    auto worker = [&]() {
        for (;;) {
            const size_t idx = next.fetch_add(1);
            if (idx >= order.size()) return;
            try {
                report.samples[idx] = detail::run_epsilon(data, order[idx]);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (first_error.empty())
                    first_error = "epsilon 1/" + std::to_string(order[idx]) + ": " + e.what();
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (!first_error.empty()) throw std::runtime_error(first_error);

    // fits on the four smallest epsilons (asymptotic regime)
    std::vector<std::pair<Functional, double>> keys;
    for (Functional f : cfg.functionals) {
        if (functional_has_p(f))
            for (double p : cfg.ps) keys.emplace_back(f, p);
        else
            keys.emplace_back(f, 0.0);
    }
    for (const auto& [f, p] : keys) {
        std::vector<std::pair<double, double>> pts;
        for (const EpsSample& s : report.samples)
            for (const FunctionalValue& v : s.values)
                if (v.kind == f && v.p == p) {
                    if (v.value > 0.0)
                        pts.emplace_back(1.0 / s.eps_inv, v.value);
                    else
                        report.zero_samples.push_back(functional_name(f) +
                                                      (p > 0 ? " p=" + std::to_string(p) : "") +
                                                      " at eps=1/" + std::to_string(s.eps_inv));
                }
        std::sort(pts.begin(), pts.end());  // ascending epsilon
        if (pts.size() > 4) pts.resize(4);
        if (pts.size() >= 3) report.fits.push_back({f, p, fit_rate(pts)});
    }
    return report;
}

/// The paper's five experiments, one command each. Sweep choices are
/// calibrated so the fitted window sits in each functional's measurable
/// regime:
///  - figure-1/figure-4 extend the sweep to 1/100: the plain sup-norm error
///    of the c-bad problem carries an eps^2 corrector term that still
///    contaminates the O(eps) signal by ~10-50% over [1/40, 1/16];
///  - figure-3 doubles the per-period resolution: the narrow Hessian stencil
///    damps the oscillatory amplitude by (pi/m_rule)^2/3 per entry, an
///    eps-independent floor that must sit well below the eps^{1/p} signal;
///  - figure-5 uses the power-of-two sweep whose grids divide the fine
///    reference grid (the cubic-sine homogenized solution is numeric only);
///  - the boundary-corrector run uses the poly right-hand side: with sinsin
///    the data -V(./eps):D^2 u vanishes identically on the boundary.
inline std::vector<ExperimentConfig> preset_configs(const std::string& name) {
    const std::vector<int> extended = {5, 8, 10, 16, 20, 32, 40, 64, 80, 100};
    auto base = [](const std::string& label, const std::string& coef, const std::string& rhs,
                   std::vector<Functional> fns) {
        ExperimentConfig c;
        c.label = label;
        c.coefficient = coef;
        c.rhs = rhs;
        c.functionals = std::move(fns);
        return c;
    };
    if (name == "figure-1") {
        auto c = base("figure-1", "cbad", "sinsin",
                      {Functional::plain_linf, Functional::e0_inf});
        c.eps_inv = extended;
        return {c};
    }
    if (name == "figure-2")
        return {base("figure-2", "cbad", "poly", {Functional::e1_p})};
    if (name == "figure-3") {
        auto c = base("figure-3", "cbad", "poly", {Functional::e2_p});
        c.m_rule = 32;
        return {c};
    }
    if (name == "figure-4") {
        auto cb = base("figure-4-cbad", "cbad", "poly",
                       {Functional::plain_linf, Functional::e0_inf});
        cb.eps_inv = extended;
        auto cg = cb;
        cg.label = "figure-4-cgood";
        cg.coefficient = "cgood";
        return {cb, cg};
    }
    if (name == "figure-5") {
        auto cb = base("figure-5-cbad", "cbad", "cubic-sine",
                       {Functional::plain_linf, Functional::e0_inf});
        cb.eps_inv = {4, 8, 16, 32};
        cb.fine_m = 1024;
        auto cg = cb;
        cg.label = "figure-5-cgood";
        cg.coefficient = "cgood";
        return {cb, cg};
    }
    if (name == "boundary-corrector") {
        auto c = base("boundary-corrector", "cbad", "poly", {Functional::theta_w12});
        c.ps = {2};
        return {c};
    }
    throw std::invalid_argument("unknown preset '" + name +
                                "' (valid: figure-1 ... figure-5, boundary-corrector)");
}

}  // namespace homognd

#endif  // HOMOGND_RATES_HPP
