// Acceptance gate. Each invocation runs one numbered criterion end to end at
// its pinned tolerances and prints one [PASS]/[FAIL] line (with indented
// sub-check details). `acceptance all` runs the full gate. Nonzero exit on
// any failure.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "homognd/cell.hpp"
#include "homognd/report_io.hpp"

using namespace homognd;

namespace {

struct Gate {
    bool ok = true;
    std::vector<std::string> lines;

    void require(bool cond, const std::string& what) {
        if (!cond) ok = false;
        lines.push_back(std::string(cond ? "    ok:   " : "    FAIL: ") + what);
    }
    void note(const std::string& what) { lines.push_back("    note: " + what); }
};

std::string fmt(double v) {
    char b[40];
    std::snprintf(b, sizeof(b), "%.4g", v);
    return b;
}

double fitted_slope(const RateReport& r, Functional f, double p = 0.0) {
    for (const FitEntry& e : r.fits)
        if (e.kind == f && e.p == p) return e.fit.slope;
    throw std::runtime_error("no fit for " + functional_name(f));
}

double lsq_slope(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<std::pair<double, double>> pts;
    for (size_t q = 0; q < x.size(); ++q) pts.emplace_back(x[q], y[q]);
    return fit_rate(pts).slope;
}

// ---------------------------------------------------------------------------

// `cell --coef cbad --n 128` reproduces c1^11 = c1^22 = -1/(128 pi) to 1%,
// all other entries below 1e-6, Abar = identity to 1e-6, in under 30 s.
void criterion_1(Gate& g) {
    const std::string dir = "acceptance-c1-out";
    const std::string cmd = std::string(HOMOGND_CLI_PATH) + " cell --coef cbad --n 128 -o " +
                            dir + " > acceptance-c1-log.txt 2>&1";
    const auto t0 = std::chrono::steady_clock::now();
    const int rc = std::system(cmd.c_str());
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    g.require(rc == 0, "cell subcommand exit code 0");
    if (rc != 0) return;

    std::ifstream is(dir + "/summary.json");
    const auto j = nlohmann::json::parse(is);
    const double exact = -1.0 / (128.0 * pi);
    const auto& c = j.at("c_tensor");
    g.require(std::fabs(c.at("c1_11").get<double>() - exact) < 0.01 * std::fabs(exact),
              "c1^11 = " + fmt(c.at("c1_11").get<double>()) + " within 1% of -1/(128 pi)");
    g.require(std::fabs(c.at("c1_22").get<double>() - exact) < 0.01 * std::fabs(exact),
              "c1^22 within 1% of -1/(128 pi)");
    for (const char* key : {"c1_12", "c2_11", "c2_12", "c2_22"})
        g.require(std::fabs(c.at(key).get<double>()) < 1e-6,
                  std::string(key) + " below 1e-6 (got " + fmt(c.at(key).get<double>()) + ")");
    const auto& ab = j.at("abar");
    g.require(std::fabs(ab.at("a11").get<double>() - 1.0) < 1e-6 &&
                  std::fabs(ab.at("a12").get<double>()) < 1e-6 &&
                  std::fabs(ab.at("a22").get<double>() - 1.0) < 1e-6,
              "Abar = identity to 1e-6");
    g.require(j.at("classification") == "c-bad", "classified c-bad");
    g.require(wall < 30.0, "runtime " + fmt(wall) + " s < 30 s");
}

// Computed r, v11, v22, psi match the closed forms over N in {32,...,256}.
// r and psi are trigonometric eigenfunctions of the stencils and come back
// at solver precision (max error < 1e-8 at every N counts as exact
// recovery); v11 and v22 carry a real O(h^2) error and must refine at order
// 2.0 +- 0.3.
void criterion_2(Gate& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const CoefficientPack pack = builtin_cbad();
    const std::vector<int> ns = {32, 64, 128, 256};
    std::map<std::string, std::vector<double>> errs;
    for (int n : ns) {
        CellEngine eng(pack.spec, n);
        auto max_err = [n](const TorusField& f, const ScalarForm& exact) {
            double m = 0.0;
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i)
                    m = std::max(m, std::fabs(f.at(i, j) - exact.val(static_cast<double>(i) / n,
                                                                     static_cast<double>(j) / n)));
            return m;
        };
        errs["r"].push_back(max_err(eng.invariant_measure(), pack.r));
        errs["v11"].push_back(max_err(eng.corrector(1, 1), pack.V.e11));
        errs["v22"].push_back(max_err(eng.corrector(2, 2), pack.V.e22));
        errs["psi"].push_back(max_err(eng.divergence_form_transform().first, pack.psi));
    }
    for (const auto& [name, e] : errs) {
        const double worst = *std::max_element(e.begin(), e.end());
        if (worst < 1e-8) {
            g.require(true, name + " recovered exactly at every N (max error " + fmt(worst) +
                                "; refinement order vacuous)");
            continue;
        }
        std::vector<double> hs;
        for (int n : ns) hs.push_back(1.0 / n);
        const double slope = lsq_slope(hs, e);
        g.require(std::fabs(slope - 2.0) <= 0.3,
                  name + " refines at order " + fmt(slope) + " (2.0 +- 0.3), final error " +
                      fmt(e.back()));
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    g.require(wall < 120.0, "runtime " + fmt(wall) + " s < 2 min");
}

// Figure 1 (c-bad, sinsin): plain sup slope in [0.85, 1.15], corrected
// E0inf slope in [1.8, 2.2], fitted over the four smallest epsilons of the
// preset sweep.
void criterion_3(Gate& g) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig cfg = preset_configs("figure-1").at(0);
    const RateReport r = run_experiment(cfg);
    const double plain = fitted_slope(r, Functional::plain_linf);
    const double e0 = fitted_slope(r, Functional::e0_inf);
    g.require(plain >= 0.85 && plain <= 1.15,
              "plain L-inf slope " + fmt(plain) + " in [0.85, 1.15]");
    g.require(e0 >= 1.8 && e0 <= 2.2, "E0inf slope " + fmt(e0) + " in [1.8, 2.2]");
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    g.require(wall < 600.0, "runtime " + fmt(wall) + " s < 10 min");
}

// Figure 2 (c-bad, poly): E1p slopes within +-0.15 of 1 + 1/p.
void criterion_4(Gate& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const RateReport r = run_experiment(preset_configs("figure-2").at(0));
    for (double p : {2.0, 3.0, 4.0, 5.0}) {
        const double s = fitted_slope(r, Functional::e1_p, p);
        g.require(std::fabs(s - (1.0 + 1.0 / p)) <= 0.15,
                  "E1p slope at p=" + fmt(p) + " is " + fmt(s) + " (target " +
                      fmt(1.0 + 1.0 / p) + " +- 0.15)");
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    g.require(wall < 900.0, "runtime " + fmt(wall) + " s < 15 min");
}

// Figure 3 (c-bad, poly): E2p slopes within +-0.10 of 1/p on the interior
// evaluation strip.
void criterion_5(Gate& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const RateReport r = run_experiment(preset_configs("figure-3").at(0));
    for (double p : {2.0, 3.0, 4.0, 5.0}) {
        const double s = fitted_slope(r, Functional::e2_p, p);
        g.require(std::fabs(s - 1.0 / p) <= 0.10,
                  "E2p slope at p=" + fmt(p) + " is " + fmt(s) + " (target " + fmt(1.0 / p) +
                      " +- 0.10)");
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    g.require(wall < 900.0, "runtime " + fmt(wall) + " s < 15 min");
}

// Figures 4-5: c-good plain slopes ~ eps^2 for poly and cubic-sine; c-bad
// corrected slopes ~ eps^2; c-bad plain slopes in [0.85, 1.15]. The last
// clause cannot be met at this scale for these right-hand sides (the
// O(eps) coefficient 2|z| is 3.7e-5 for poly and 1.2e-6 for cubic-sine,
// below the eps^2 corrector term for every feasible epsilon); it is gated
// faithfully and reported with the measured slope.
void criterion_6(Gate& g) {
    const auto t0 = std::chrono::steady_clock::now();
    std::map<std::string, RateReport> reports;
    for (const auto& preset : {std::string("figure-4"), std::string("figure-5")})
        for (const ExperimentConfig& cfg : preset_configs(preset))
            reports.emplace(cfg.label, run_experiment(cfg));

    const double g4 = fitted_slope(reports.at("figure-4-cgood"), Functional::plain_linf);
    g.require(g4 >= 1.8 && g4 <= 2.2, "c-good poly plain slope " + fmt(g4) + " in [1.8, 2.2]");
    const double g5 = fitted_slope(reports.at("figure-5-cgood"), Functional::plain_linf);
    g.require(g5 >= 1.8 && g5 <= 2.2,
              "c-good cubic-sine plain slope " + fmt(g5) + " in [1.8, 2.2]");

    const double c4 = fitted_slope(reports.at("figure-4-cbad"), Functional::e0_inf);
    g.require(c4 >= 1.8 && c4 <= 2.2,
              "c-bad poly corrected slope " + fmt(c4) + " in [1.8, 2.2]");
    const double c5 = fitted_slope(reports.at("figure-5-cbad"), Functional::e0_inf);
    g.require(c5 >= 1.8 && c5 <= 2.2,
              "c-bad cubic-sine corrected slope " + fmt(c5) + " in [1.8, 2.2]");

    const double p4 = fitted_slope(reports.at("figure-4-cbad"), Functional::plain_linf);
    g.require(p4 >= 0.85 && p4 <= 1.15,
              "c-bad poly plain slope " + fmt(p4) + " in [0.85, 1.15]");
    const double p5 = fitted_slope(reports.at("figure-5-cbad"), Functional::plain_linf);
    g.require(p5 >= 0.85 && p5 <= 1.15,
              "c-bad cubic-sine plain slope " + fmt(p5) + " in [0.85, 1.15]");
    if (p4 > 1.15 || p5 > 1.15)
        g.note(
            "the plain c-bad error is preasymptotic here: its O(eps) term 2 eps |z| "
            "(|z| = 3.7e-5 for poly, 1.2e-6 for cubic-sine) stays below the eps^2 "
            "corrector term until eps < ~1/250, i.e. grids beyond this criterion's "
            "runtime budget; the corrected slopes above isolate the eps^2 law itself");

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    g.require(wall < 1200.0, "runtime " + fmt(wall) + " s < 20 min");
}

// Boundary-corrector law at p = 2: slope of eps*||theta||_{W^{1,2}} in
// [0.35, 0.65] across the sweep.
void criterion_7(Gate& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const RateReport r = run_experiment(preset_configs("boundary-corrector").at(0));
    const double s = fitted_slope(r, Functional::theta_w12, 2.0);
    g.require(s >= 0.35 && s <= 0.65,
              "eps*||theta||_W12 slope " + fmt(s) + " in [0.35, 0.65]");
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    g.require(wall < 600.0, "runtime " + fmt(wall) + " s < 10 min");
}

// Property suites, runnable without any figure sweep.
void criterion_8(Gate& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const CoefficientPack cbad = builtin_cbad();
    const CoefficientPack cgood = builtin_cgood();
    const RhsPack sinsin = builtin_rhs("sinsin");
    const RhsPack poly = builtin_rhs("poly");

    {  // discrete maximum principle: f >= 0 implies u >= 0 at all nodes
        EpsProblem p;
        p.A = cbad.spec;
        p.f = poly.f.val;
        p.epsilon = Epsilon::of_inverse(4);
        const GridFunction u = solve_eps(p, 64);
        double min_u = 0.0;
        for (double v : u.v) min_u = std::min(min_u, v);
        g.require(min_u > -1e-12, "discrete maximum principle (min u = " + fmt(min_u) + ")");
    }
    {  // linearity
        EpsProblem p;
        p.A = cbad.spec;
        p.epsilon = Epsilon::of_inverse(4);
        p.f = sinsin.f.val;
        const GridFunction u1 = solve_eps(p, 64);
        p.f = poly.f.val;
        const GridFunction u2 = solve_eps(p, 64);
        p.f = [&](double a, double b) { return sinsin.f.val(a, b) + poly.f.val(a, b); };
        const GridFunction u12 = solve_eps(p, 64);
        double dev = 0.0;
        for (size_t q = 0; q < u12.v.size(); ++q)
            dev = std::max(dev, std::fabs(u12.v[q] - u1.v[q] - u2.v[q]));
        g.require(dev < 1e-7, "linearity of solve_eps (deviation " + fmt(dev) + ")");
    }
    {  // mean-zero / normalization invariants
        CellEngine eng(cbad.spec, 64);
        const TorusField& r = eng.invariant_measure();
        g.require(std::fabs(r.mean() - 1.0) < 1e-12 && r.min_value() > 0.0,
                  "invariant measure normalized (mean 1, positive)");
        const double vm = std::max(std::fabs(eng.corrector(1, 1).mean()),
                                   std::fabs(eng.corrector(2, 2).mean()));
        const double cm = std::fabs(eng.solve_chi(1, 1, 1).mean());
        g.require(vm < 1e-12 && cm < 1e-12,
                  "correctors and chi are mean-zero (worst " + fmt(std::max(vm, cm)) + ")");
    }
    {  // compatibility integrals for both packs
        double worst = 0.0;
        for (const CoefficientPack* pack : {&cbad, &cgood}) {
            CellEngine eng(pack->spec, 64);
            const SymMatrix2 ab = eng.effective_coefficient();
            const CTensor c = eng.c_tensor();
            for (const auto& jkl : CellSolution::chi_indices) {
                const TorusField& v = eng.corrector(jkl[1], jkl[2]);
                std::vector<double> gx, gy, rhs(v.data.size());
                eng.central_gradient(v.data, gx, gy);
                for (int j = 0; j < 64; ++j)
                    for (int i = 0; i < 64; ++i) {
                        const size_t idx = static_cast<size_t>(j) * 64 + i;
                        const SymMatrix2 a = pack->spec.eval(i / 64.0, j / 64.0);
                        const double flux = (jkl[0] == 1)
                                                ? a.a11 * gx[idx] + a.a12 * gy[idx]
                                                : a.a12 * gx[idx] + a.a22 * gy[idx];
                        rhs[idx] = flux - c.at(jkl[0], jkl[1], jkl[2]);
                    }
                worst = std::max(worst, std::fabs(eng.compatibility_integral(rhs)));
            }
            // corrector right-hand sides
            for (const auto& kl : {std::pair{1, 1}, std::pair{1, 2}, std::pair{2, 2}}) {
                std::vector<double> rhs(64 * 64);
                for (int j = 0; j < 64; ++j)
                    for (int i = 0; i < 64; ++i) {
                        const SymMatrix2 a = pack->spec.eval(i / 64.0, j / 64.0);
                        const double akl = (kl.first == 1 && kl.second == 1)
                                               ? a.a11
                                               : (kl.first == 2 ? a.a22 : a.a12);
                        const double abkl = (kl.first == 1 && kl.second == 1)
                                                ? ab.a11
                                                : (kl.first == 2 ? ab.a22 : ab.a12);
                        rhs[static_cast<size_t>(j) * 64 + i] = akl - abkl;
                    }
                worst = std::max(worst, std::fabs(eng.compatibility_integral(rhs)));
            }
        }
        g.require(worst < 1e-8, "solvability integrals against r (worst " + fmt(worst) + ")");
    }
    {  // skew structure of the divergence-form transform
        CellEngine eng(cbad.spec, 128);
        auto [psi, adiv] = eng.divergence_form_transform();
        const TorusField& r = eng.invariant_measure();
        double skew_dev = 0.0, sym_dev = 0.0;
        for (int j = 0; j < 128; j += 7)
            for (int i = 0; i < 128; i += 7) {
                skew_dev = std::max(skew_dev, std::fabs(adiv.at(i, j, 1) - adiv.at(i, j, 2) -
                                                        2.0 * psi.at(i, j)));
                const SymMatrix2 a = cbad.spec.eval(i / 128.0, j / 128.0);
                sym_dev = std::max(
                    sym_dev,
                    std::fabs(adiv.at(i, j, 0) - r.at(i, j) * a.a11));
                sym_dev = std::max(
                    sym_dev,
                    std::fabs(0.5 * (adiv.at(i, j, 1) + adiv.at(i, j, 2)) -
                              r.at(i, j) * a.a12));
            }
        g.require(skew_dev == 0.0, "skew part is exactly +-psi off the diagonal");
        g.require(sym_dev < 1e-12, "symmetric part equals rA at nodes (dev " + fmt(sym_dev) + ")");
        g.require(eng.residuals().at("coldiv") < 1e-8,
                  "column divergences of A^div below 1e-8 (got " +
                      fmt(eng.residuals().at("coldiv")) + ")");
    }
    {  // manufactured-solution order 2 for both backends
        for (Backend backend : {Backend::fd_nondiv, Backend::fem_div}) {
            const CoefficientPack id = builtin_constant();
            EpsProblem p;
            p.A = id.spec;
            p.f = sinsin.f.val;
            p.epsilon = Epsilon::of_inverse(4);
            p.backend = backend;
            p.r = id.r.val;
            p.adiv = [id](double a, double b) { return id.adiv(a, b); };
            std::vector<double> errs, hs;
            for (int m : {64, 128, 256}) {
                const GridFunction u = solve_eps(p, m);
                double e = 0.0;
                for (int j = 0; j <= m; ++j)
                    for (int i = 0; i <= m; ++i)
                        e = std::max(e, std::fabs(u.at(i, j) -
                                                  sinsin.u.val(static_cast<double>(i) / m,
                                                               static_cast<double>(j) / m)));
                errs.push_back(e);
                hs.push_back(1.0 / m);
            }
            const double slope = lsq_slope(hs, errs);
            g.require(std::fabs(slope - 2.0) <= 0.2,
                      backend_name(backend) + " manufactured order " + fmt(slope) +
                          " (2.0 +- 0.2)");
        }
    }
    {  // eps-uniform stability: one constant across the sweep
        double fmax = 0.0;
        for (int q = 0; q <= 64; ++q)
            for (int w = 0; w <= 64; ++w)
                fmax = std::max(fmax, std::fabs(sinsin.f.val(q / 64.0, w / 64.0)));
        double worst_ratio = 0.0;
        for (int k : {4, 5, 8, 10, 16}) {
            EpsProblem p;
            p.A = cbad.spec;
            p.f = sinsin.f.val;
            p.epsilon = Epsilon::of_inverse(k);
            worst_ratio = std::max(worst_ratio, solve_eps(p, 16 * k).max_abs() / fmax);
        }
        g.require(worst_ratio <= 0.5,
                  "eps-uniform bound max|u|/max|f| = " + fmt(worst_ratio) + " <= 0.5");
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    g.require(wall < 300.0, "runtime " + fmt(wall) + " s < 5 min");
}

const char* titles[] = {"cell oracle equivalence",
                        "closed-form field recovery under refinement",
                        "figure-1 reproduction (c-bad, sinsin)",
                        "figure-2 reproduction (E1p slopes)",
                        "figure-3 reproduction (E2p slopes)",
                        "figures 4-5 reproduction (c-bad vs c-good)",
                        "boundary-corrector law at p = 2",
                        "property suites"};

int run_criterion(int k) {
    Gate g;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        switch (k) {
            case 1: criterion_1(g); break;
            case 2: criterion_2(g); break;
            case 3: criterion_3(g); break;
            case 4: criterion_4(g); break;
            case 5: criterion_5(g); break;
            case 6: criterion_6(g); break;
            case 7: criterion_7(g); break;
            case 8: criterion_8(g); break;
            default:
                std::fprintf(stderr, "criterion must be 1..8 or 'all'\n");
                return 2;
        }
    } catch (const std::exception& e) {
        g.require(false, std::string("unexpected exception: ") + e.what());
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %d: %s (%.1f s)\n", g.ok ? "PASS" : "FAIL", k, titles[k - 1],
                wall);
    for (const std::string& line : g.lines) std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    return g.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: acceptance <1..8|all>\n");
        return 2;
    }
    if (std::strcmp(argv[1], "all") == 0) {
        int bad = 0;
        for (int k = 1; k <= 8; ++k) bad += run_criterion(k) != 0;
        std::printf("%d of 8 criteria passed\n", 8 - bad);
        return bad == 0 ? 0 : 1;
    }
    return run_criterion(std::atoi(argv[1]));
}
