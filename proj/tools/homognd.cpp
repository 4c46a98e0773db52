// homognd: cell-problem runs, single Dirichlet solves, convergence-rate
// sweeps and mesh studies for nondivergence-form periodic homogenization.
//
// Exit codes: 0 success, 2 configuration error, 3 solver failure.
#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <iostream>

#include "homognd/report_io.hpp"

using namespace homognd;

namespace {

std::string output_dir_default() {
    if (const char* env = std::getenv("HOMOG_ND_OUT")) return env;
    return "out";
}

nlohmann::ordered_json sym_to_json(const SymMatrix2& a) {
    return {{"a11", a.a11}, {"a12", a.a12}, {"a22", a.a22}};
}

nlohmann::ordered_json ctensor_to_json(const CTensor& c) {
    return {{"c1_11", c.c1_11}, {"c1_12", c.c1_12}, {"c1_22", c.c1_22},
            {"c2_11", c.c2_11}, {"c2_12", c.c2_12}, {"c2_22", c.c2_22}};
}

CoefficientSpec resolve_coefficient(const std::string& name) {
    try {
        return coefficient_by_name(name).spec;
    } catch (const std::invalid_argument&) {
        if (!std::filesystem::exists(name))
            throw std::invalid_argument(
                "unknown coefficient '" + name +
                "' (valid: cbad, cgood, constant-identity, or a path to a sampled grid file)");
        return CoefficientSpec::from_samples(name, load_torus_field(name));
    }
}

// comma lists may arrive as one token ("1/4,1/5") or pre-split by the
// config-file reader; flatten both forms
std::vector<std::string> split_list(const std::vector<std::string>& parts) {
    std::vector<std::string> out;
    for (const auto& part : parts) {
        std::stringstream ss(part);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

std::vector<int> parse_eps_list(const std::vector<std::string>& parts) {
    std::vector<int> out;
    for (const auto& tok : split_list(parts)) out.push_back(Epsilon::parse(tok).inv);
    return out;
}

template <class T>
std::vector<T> parse_num_list(const std::vector<std::string>& parts) {
    std::vector<T> out;
    for (const auto& tok : split_list(parts)) out.push_back(static_cast<T>(std::stod(tok)));
    return out;
}

struct CellArgs {
    std::string coef = "cbad";
    int n = 128;
    double tol = 1e-10;
    int maxit = 10000;
    std::string format = "text";
    std::string out;
};

int cmd_cell(const CellArgs& a) {
    namespace fs = std::filesystem;
    const auto t0 = std::chrono::steady_clock::now();
    CellOptions opt;
    opt.tol = a.tol;
    opt.max_iterations = a.maxit;
    const CoefficientSpec spec = resolve_coefficient(a.coef);
    const CellSolution s = solve_cell(spec, a.n, opt);

    fs::create_directories(a.out);
    const GridFileFormat fmt =
        a.format == "binary" ? GridFileFormat::binary : GridFileFormat::text;
    auto path = [&](const std::string& name) { return (fs::path(a.out) / name).string(); };
    save_torus_field(s.r, path("r.grid"), fmt);
    save_torus_field(s.v11, path("v11.grid"), fmt);
    save_torus_field(s.v12, path("v12.grid"), fmt);
    save_torus_field(s.v22, path("v22.grid"), fmt);
    for (size_t q = 0; q < s.chi.size(); ++q) {
        const auto& jkl = CellSolution::chi_indices[q];
        save_torus_field(s.chi[q],
                         path("chi" + std::to_string(jkl[0]) + std::to_string(jkl[1]) +
                              std::to_string(jkl[2]) + ".grid"),
                         fmt);
    }
    save_torus_field(s.psi, path("psi.grid"), fmt);
    save_torus_field(s.adiv, path("adiv.grid"), fmt);

    nlohmann::ordered_json j;
    j["library_version"] = library_version;
    j["config"] = {{"coefficient", a.coef}, {"n", a.n}, {"tol", a.tol}, {"maxit", a.maxit}};
    j["abar"] = sym_to_json(s.abar);
    j["c_tensor"] = ctensor_to_json(s.c);
    j["classification"] = s.cls == Classification::c_bad ? "c-bad" : "c-good";
    j["invariants"] = {{"r_mean", s.r.mean()},
                       {"r_min", s.r.min_value()},
                       {"v11_mean", s.v11.mean()},
                       {"v12_mean", s.v12.mean()},
                       {"v22_mean", s.v22.mean()},
                       {"psi_mean", s.psi.mean()}};
    nlohmann::ordered_json res;
    for (const auto& [k, v] : s.residuals) res[k] = v;
    j["residuals"] = std::move(res);
    {
        std::ofstream os(path("summary.json"), std::ios::binary);
        os << j.dump(2) << '\n';
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "coefficient " << a.coef << " at N = " << a.n << ": "
              << (s.cls == Classification::c_bad ? "c-bad" : "c-good") << "\n"
              << "  c1^11 = " << s.c.c1_11 << ", c1^22 = " << s.c.c1_22
              << ", max |c| = " << s.c.max_abs() << "\n"
              << "  Abar = [" << s.abar.a11 << ", " << s.abar.a12 << "; " << s.abar.a12 << ", "
              << s.abar.a22 << "]\n"
              << "  outputs in " << a.out << " (wall " << dt << " s)\n";
    return 0;
}

struct SolveArgs {
    std::string coef = "cbad";
    std::string rhs = "sinsin";
    std::string eps = "1/8";
    int m = 128;
    std::string backend = "fd-nondiv";
    std::string problem = "eps";
    bool write_diff = false;
    std::string out;
};

int cmd_solve(const SolveArgs& a) {
    namespace fs = std::filesystem;
    const auto t0 = std::chrono::steady_clock::now();
    const Epsilon eps = Epsilon::parse(a.eps);
    const RhsPack rhs = builtin_rhs(a.rhs);

    bool have_pack = true;
    CoefficientPack pack;
    try {
        pack = coefficient_by_name(a.coef);
    } catch (const std::invalid_argument&) {
        have_pack = false;
    }

    GridFunction u;
    const ScalarForm* exact = nullptr;
    if (a.problem == "eps") {
        EpsProblem p;
        p.A = have_pack ? pack.spec : resolve_coefficient(a.coef);
        p.f = rhs.f.val;
        p.epsilon = eps;
        p.backend = backend_by_name(a.backend);
        if (have_pack) {
            p.r = pack.r.val;
            p.adiv = [pack](double y1, double y2) { return pack.adiv(y1, y2); };
        }
        u = solve_eps(p, a.m);
        if (rhs.has_u) exact = &rhs.u;  // homogenization error against the exact limit
    } else if (a.problem == "homogenized") {
        if (!have_pack)
            throw std::invalid_argument("problem=homogenized needs a builtin coefficient");
        u = solve_homogenized(pack.abar, rhs.f.val, a.m);
        if (rhs.has_u) exact = &rhs.u;
    } else if (a.problem == "z") {
        if (!have_pack) throw std::invalid_argument("problem=z needs a builtin coefficient");
        const CTensor c = pack.c;
        const double scale = std::max(pack.abar.max_abs(), 1e-300);
        if (c.max_abs() <= 1e-5 * scale) {
            u = GridFunction::zero(a.m);
        } else {
            const double w = -c.c1_11 / pack.abar.a11;
            u = solve_z(pack.abar,
                        [&rhs, w](double x1, double x2) { return w * rhs.f.d1(x1, x2); }, a.m);
        }
        if (rhs.has_z) exact = &rhs.z;
    } else if (a.problem == "theta") {
        if (!have_pack || !rhs.has_u)
            throw std::invalid_argument(
                "problem=theta needs a builtin coefficient and a right-hand side with exact u");
        auto v_at = [&pack](double y1, double y2) { return pack.V.val(y1, y2); };
        auto d2u = [&rhs](double x1, double x2) {
            return std::array<double, 3>{rhs.u.d11(x1, x2), rhs.u.d12(x1, x2),
                                         rhs.u.d22(x1, x2)};
        };
        u = solve_boundary_corrector(have_pack ? pack.spec : resolve_coefficient(a.coef), eps,
                                     v_at, d2u, a.m);
    } else {
        throw std::invalid_argument("unknown problem '" + a.problem +
                                    "' (valid: eps, homogenized, z, theta)");
    }

    fs::create_directories(a.out);
    auto path = [&](const std::string& name) { return (fs::path(a.out) / name).string(); };
    save_grid_function(u, path("u.grid"));

    nlohmann::ordered_json j;
    j["library_version"] = library_version;
    j["config"] = {{"coefficient", a.coef}, {"rhs", a.rhs},     {"epsilon", eps.label()},
                   {"m", a.m},              {"backend", a.backend}, {"problem", a.problem}};
    if (exact) {
        double err = 0.0;
        const double h = u.h();
        GridFunction diff = GridFunction::zero(a.m);
        for (int jj = 0; jj <= a.m; ++jj)
            for (int ii = 0; ii <= a.m; ++ii) {
                diff.at(ii, jj) = u.at(ii, jj) - exact->val(ii * h, jj * h);
                err = std::max(err, std::fabs(diff.at(ii, jj)));
            }
        j["max_error_vs_exact"] = err;
        if (a.write_diff) save_grid_function(diff, path("diff.grid"));
        std::cout << "max error vs exact solution: " << err << "\n";
    }
    {
        std::ofstream os(path("summary.json"), std::ios::binary);
        os << j.dump(2) << '\n';
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "wrote " << path("u.grid") << " (wall " << dt << " s)\n";
    return 0;
}

struct RatesArgs {
    std::string preset;
    std::string coef = "cbad";
    std::string rhs = "sinsin";
    std::string backend = "fd-nondiv";
    std::vector<std::string> eps_list;
    std::vector<std::string> p_list;
    std::vector<std::string> functionals;
    std::vector<std::string> numeric;  // objects among r,V,u,z to force numeric
    int m_rule = 16;
    int cell_n = 128;
    int fine_m = 1024;
    int jobs = 0;
    unsigned long seed = 0;
    std::string out;
};

int cmd_rates(const RatesArgs& a) {
    std::vector<ExperimentConfig> cfgs;
    if (!a.preset.empty()) {
        cfgs = preset_configs(a.preset);
    } else {
        ExperimentConfig c;
        c.coefficient = a.coef;
        c.rhs = a.rhs;
        if (!a.eps_list.empty()) c.eps_inv = parse_eps_list(a.eps_list);
        if (!a.p_list.empty()) c.ps = parse_num_list<double>(a.p_list);
        if (!a.functionals.empty()) {
            c.functionals.clear();
            for (const auto& tok : split_list(a.functionals))
                c.functionals.push_back(functional_by_name(tok));
        }
        c.backend = backend_by_name(a.backend);
        c.m_rule = a.m_rule;
        c.cell_n = a.cell_n;
        c.fine_m = a.fine_m;
        cfgs = {c};
    }
    for (ExperimentConfig& c : cfgs) {
        c.jobs = a.jobs;
        c.seed = a.seed;
        c.output_dir = a.out;
        for (const auto& tok : split_list(a.numeric)) {
            if (tok == "r") c.oracles.r = false;
            else if (tok == "V" || tok == "v") c.oracles.v = false;
            else if (tok == "u") c.oracles.u = false;
            else if (tok == "z") c.oracles.z = false;
            else throw std::invalid_argument("--numeric: unknown object '" + tok + "'");
        }
    }
    for (const ExperimentConfig& c : cfgs) {
        const auto t0 = std::chrono::steady_clock::now();
        const RateReport r = run_experiment(c);
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto files = write_report(r, a.out);
        std::cout << "== " << c.label << " (" << c.coefficient << ", " << c.rhs << ", "
                  << backend_name(c.backend) << "; wall " << dt << " s)\n";
        std::cout << "   functional        p    slope     r^2\n";
        for (const FitEntry& f : r.fits) {
            char line[128];
            std::snprintf(line, sizeof(line), "   %-14s %5g  %7.4f  %.5f",
                          functional_name(f.kind).c_str(), f.p, f.fit.slope, f.fit.r_squared);
            std::cout << line << "\n";
        }
        for (const std::string& zs : r.zero_samples)
            std::cout << "   zero sample (excluded from fits): " << zs << "\n";
        for (const auto& f : files) std::cout << "   wrote " << f << "\n";
    }
    return 0;
}

struct MeshStudyArgs {
    std::string coef = "cbad";
    std::string rhs = "sinsin";
    std::string eps = "1/8";
    std::string backend = "fd-nondiv";
    std::vector<std::string> m_list;
    std::vector<std::string> functionals = {"plainLinf", "E0inf"};
    std::string out;
    int jobs = 0;
};

int cmd_mesh_study(const MeshStudyArgs& a) {
    const Epsilon eps = Epsilon::parse(a.eps);
    std::vector<int> ms;
    if (a.m_list.empty()) {
        for (int mult : {16, 32, 64}) ms.push_back(mult * eps.inv);
    } else {
        ms = parse_num_list<int>(a.m_list);
    }
    std::vector<Functional> fns;
    for (const auto& tok : split_list(a.functionals)) fns.push_back(functional_by_name(tok));

    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    std::vector<std::map<std::string, double>> values;
    for (int m : ms) {
        if (m % eps.inv != 0 || m < 16 * eps.inv)
            throw std::invalid_argument(
                "mesh-study: each M must be a multiple of 1/epsilon and at least " +
                std::to_string(16 * eps.inv));
        ExperimentConfig c;
        c.label = "mesh-study";
        c.coefficient = a.coef;
        c.rhs = a.rhs;
        c.backend = backend_by_name(a.backend);
        c.eps_inv = {eps.inv};
        c.m_rule = m / eps.inv;
        c.functionals = fns;
        c.jobs = a.jobs;
        const RateReport r = run_experiment(c);
        std::map<std::string, double> row;
        nlohmann::ordered_json jr;
        jr["m"] = m;
        for (const FunctionalValue& v : r.samples.at(0).values) {
            std::string key = functional_name(v.kind);
            if (functional_has_p(v.kind)) key += "(p=" + std::to_string(v.p).substr(0, 4) + ")";
            row[key] = v.value;
            jr[key] = v.value;
        }
        values.push_back(row);
        rows.push_back(std::move(jr));
    }

    std::cout << "mesh study: " << a.coef << ", " << a.rhs << ", eps = " << eps.label() << "\n";
    for (size_t q = 0; q < ms.size(); ++q) {
        std::cout << "  M = " << ms[q] << ":";
        for (const auto& [k, v] : values[q]) {
            std::cout << "  " << k << " = " << v;
            if (q > 0) {
                const double prev = values[q - 1].at(k);
                if (prev != 0.0) {
                    char buf[32];
                    std::snprintf(buf, sizeof(buf), " (%+.2f%%)", 100.0 * (v - prev) / prev);
                    std::cout << buf;
                }
            }
        }
        std::cout << "\n";
    }
    namespace fs = std::filesystem;
    fs::create_directories(a.out);
    nlohmann::ordered_json j;
    j["library_version"] = library_version;
    j["config"] = {{"coefficient", a.coef},
                   {"rhs", a.rhs},
                   {"epsilon", eps.label()},
                   {"backend", a.backend}};
    j["rows"] = std::move(rows);
    std::ofstream os((fs::path(a.out) / "mesh-study.json").string(), std::ios::binary);
    os << j.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"homogenization toolkit for nondivergence-form elliptic problems"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "flat key=value configuration file (flags override)");

    std::string out_dir = output_dir_default();
    int jobs = 0;
    app.add_option("--out,-o", out_dir, "output directory (env HOMOG_ND_OUT overrides default)");
    app.add_option("--jobs,-j", jobs, "bound on concurrent epsilon jobs (0 = all processors)");

    CellArgs cell;
    auto* sc_cell = app.add_subcommand("cell", "solve the periodic cell problems");
    sc_cell->add_option("--coef", cell.coef, "builtin name (cbad, cgood, constant-identity) or grid file");
    sc_cell->add_option("--n", cell.n, "torus resolution (even, >= 8)");
    sc_cell->add_option("--tol", cell.tol, "relative solver tolerance");
    sc_cell->add_option("--maxit", cell.maxit, "iteration cap");
    sc_cell->add_option("--format", cell.format, "grid file format: text|binary")
        ->check(CLI::IsMember({"text", "binary"}));

    SolveArgs solve;
    auto* sc_solve = app.add_subcommand("solve", "single Dirichlet solve");
    sc_solve->add_option("--coef", solve.coef, "coefficient name or grid file");
    sc_solve->add_option("--rhs", solve.rhs, "right-hand side: sinsin, poly, cubic-sine");
    sc_solve->add_option("--eps", solve.eps, "epsilon as 1/k");
    sc_solve->add_option("--m", solve.m, "cells per side");
    sc_solve->add_option("--backend", solve.backend, "fd-nondiv | fem-div");
    sc_solve->add_option("--problem", solve.problem, "eps | homogenized | z | theta");
    sc_solve->add_flag("--write-diff", solve.write_diff, "also write the difference vs the exact solution");

    RatesArgs rates;
    auto* sc_rates = app.add_subcommand("rates", "epsilon sweep with error functionals and slope fits");
    sc_rates->add_option("--preset", rates.preset,
                         "figure-1 ... figure-5, boundary-corrector");
    sc_rates->add_option("--coef", rates.coef, "coefficient name or grid file");
    sc_rates->add_option("--rhs", rates.rhs, "right-hand side name");
    sc_rates->add_option("--backend", rates.backend, "fd-nondiv | fem-div");
    sc_rates->add_option("--eps-list", rates.eps_list, "comma list of epsilons (1/k)");
    sc_rates->add_option("--p-list", rates.p_list, "comma list of L^p exponents");
    sc_rates->add_option("--functionals", rates.functionals,
                         "comma list: plainLinf,plainW1p,E0inf,E1p,E2p,thetaW1p");
    sc_rates->add_option("--numeric", rates.numeric,
                         "force numeric cell/reference objects (comma list among r,V,u,z)");
    sc_rates->add_option("--m-rule", rates.m_rule, "M = m-rule / epsilon (>= 16)");
    sc_rates->add_option("--cell-n", rates.cell_n, "torus resolution for numeric cell objects");
    sc_rates->add_option("--fine-m", rates.fine_m, "grid for the numeric homogenized reference");
    sc_rates->add_option("--seed", rates.seed, "seed for synthetic-noise self-tests");

    MeshStudyArgs mesh;
    auto* sc_mesh = app.add_subcommand("mesh-study", "fixed epsilon, refined grids");
    sc_mesh->add_option("--coef", mesh.coef, "coefficient name or grid file");
    sc_mesh->add_option("--rhs", mesh.rhs, "right-hand side name");
    sc_mesh->add_option("--eps", mesh.eps, "epsilon as 1/k");
    sc_mesh->add_option("--backend", mesh.backend, "fd-nondiv | fem-div");
    sc_mesh->add_option("--m-list", mesh.m_list, "comma list of M values (default 16,32,64 / eps)");
    sc_mesh->add_option("--functionals", mesh.functionals, "comma list of functionals");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        cell.out = solve.out = rates.out = mesh.out = out_dir;
        rates.jobs = mesh.jobs = jobs;
        if (sc_cell->parsed()) return cmd_cell(cell);
        if (sc_solve->parsed()) return cmd_solve(solve);
        if (sc_rates->parsed()) return cmd_rates(rates);
        if (sc_mesh->parsed()) return cmd_mesh_study(mesh);
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
