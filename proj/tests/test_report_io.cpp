#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <random>

#include "homognd/report_io.hpp"

using namespace homognd;

namespace {
std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("torus field files round-trip exactly in both formats") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    TorusField f = TorusField::matrix(16);
    for (double& v : f.data) v = dist(rng);

    for (GridFileFormat fmt : {GridFileFormat::text, GridFileFormat::binary}) {
        const std::string path = tmp_path("homognd_field_test.grid");
        save_torus_field(f, path, fmt);
        const TorusField g = load_torus_field(path);
        REQUIRE(g.n == f.n);
        REQUIRE(g.kind == FieldKind::matrix);
        for (size_t q = 0; q < f.data.size(); ++q) CHECK(g.data[q] == f.data[q]);
    }
}

TEST_CASE("grid function files round-trip exactly") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    GridFunction g = GridFunction::zero(12);
    for (double& v : g.v) v = dist(rng);
    for (GridFileFormat fmt : {GridFileFormat::text, GridFileFormat::binary}) {
        const std::string path = tmp_path("homognd_gf_test.grid");
        save_grid_function(g, path, fmt);
        const GridFunction h = load_grid_function(path);
        REQUIRE(h.m == g.m);
        for (size_t q = 0; q < g.v.size(); ++q) CHECK(h.v[q] == g.v[q]);
    }
}

TEST_CASE("malformed grid files are rejected") {
    const std::string path = tmp_path("homognd_bad.grid");
    {
        std::ofstream os(path);
        os << "16 scalar\n1 2 3\n";  // truncated
    }
    CHECK_THROWS_AS(load_torus_field(path), std::runtime_error);
    {
        std::ofstream os(path);
        os << "frog scalar\n";
    }
    CHECK_THROWS_AS(load_torus_field(path), std::runtime_error);
    CHECK_THROWS_AS(load_torus_field(tmp_path("does_not_exist.grid")), std::runtime_error);
}

TEST_CASE("report serialization carries config, samples, fits and no timestamps") {
    ExperimentConfig cfg;
    cfg.label = "io-smoke";
    cfg.coefficient = "constant-identity";
    cfg.rhs = "sinsin";
    cfg.eps_inv = {4, 5, 6};
    cfg.ps = {2};
    cfg.functionals = {Functional::plain_linf, Functional::e1_p};
    cfg.jobs = 1;
    const RateReport r = run_experiment(cfg);

    const auto j = report_to_json(r);
    CHECK(j["library_version"] == library_version);
    CHECK(j["config"]["coefficient"] == "constant-identity");
    CHECK(j["samples"].size() == 3);
    CHECK(j["provenance"].contains("u"));
    const std::string dumped = j.dump(2);
    CHECK(dumped.find("time") == std::string::npos);

    const std::string csv = report_to_csv(r);
    CHECK(csv.find("# homognd") == 0);
    CHECK(csv.find("epsilon,functional,p,value") != std::string::npos);
    // one line per (sample, functional value) plus 3 header lines
    size_t lines = 0;
    for (char ch : csv) lines += (ch == '\n');
    size_t values = 0;
    for (const auto& s : r.samples) values += s.values.size();
    CHECK(lines == values + 3);

    const auto svgs = report_to_svgs(r);
    REQUIRE(svgs.count("plainLinf") == 1);
    REQUIRE(svgs.count("E1p") == 1);
    for (const auto& [name, svg] : svgs) {
        INFO(name);
        CHECK(svg.rfind("<svg", 0) == 0);
        CHECK(svg.find("</svg>") != std::string::npos);
        CHECK(svg.find("slope") != std::string::npos);
    }

    const std::string dir = tmp_path("homognd_report_dir");
    std::filesystem::remove_all(dir);
    const auto written = write_report(r, dir);
    CHECK(written.size() == 4);  // json, csv, two svgs
    for (const auto& p : written) CHECK(std::filesystem::exists(p));

    // byte-identical re-run
    const RateReport r2 = run_experiment(cfg);
    CHECK(report_to_json(r2).dump(2) == dumped);
}
