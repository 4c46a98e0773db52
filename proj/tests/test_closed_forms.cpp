#include <catch2/catch_amalgamated.hpp>

#include "homognd/closed_forms.hpp"

using namespace homognd;

namespace {

// max over the 64x64 sample grid
template <class Fn>
double grid_max(Fn&& fn, int n = 64) {
    double m = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            m = std::max(m, std::fabs(fn(static_cast<double>(i) / n, static_cast<double>(j) / n)));
    return m;
}

double central_d1(const ScalarForm& g, double y1, double y2, double h) {
    return (g.val(y1 + h, y2) - g.val(y1 - h, y2)) / (2.0 * h);
}
double central_d2(const ScalarForm& g, double y1, double y2, double h) {
    return (g.val(y1, y2 + h) - g.val(y1, y2 - h)) / (2.0 * h);
}

// first-derivative evaluators agree with central differences at second order
void check_gradient_consistency(const ScalarForm& g, double scale) {
    const double pts[][2] = {{0.13, 0.41}, {0.52, 0.77}, {0.86, 0.09}};
    for (const auto& p : pts) {
        const double e1 = std::fabs(central_d1(g, p[0], p[1], 1e-3) - g.d1(p[0], p[1]));
        const double e2 = std::fabs(central_d1(g, p[0], p[1], 5e-4) - g.d1(p[0], p[1]));
        REQUIRE(e2 <= e1 / 3.0 + 1e-11 * scale);
        const double f1 = std::fabs(central_d2(g, p[0], p[1], 1e-3) - g.d2(p[0], p[1]));
        const double f2 = std::fabs(central_d2(g, p[0], p[1], 5e-4) - g.d2(p[0], p[1]));
        REQUIRE(f2 <= f1 / 3.0 + 1e-11 * scale);
    }
}

}  // namespace

TEST_CASE("cbad pack reproduces the paper's constants") {
    const CoefficientPack p = builtin_cbad();
    CHECK(p.c.c1_11 == -1.0 / (128.0 * pi));
    CHECK(p.c.c1_22 == -1.0 / (128.0 * pi));
    CHECK(p.c.c1_12 == 0.0);
    CHECK(p.c.c2_11 == 0.0);
    CHECK(p.c.c2_12 == 0.0);
    CHECK(p.c.c2_22 == 0.0);
    CHECK(p.c.c1_11 == Catch::Approx(-2.48680e-3).epsilon(1e-4));
    CHECK(p.abar.a11 == 1.0);
    CHECK(p.abar.a12 == 0.0);
    CHECK(p.abar.a22 == 1.0);
    CHECK(p.V.e12.val(0.3, 0.7) == 0.0);  // diagonal corrector matrix
    CHECK(p.spec.lambda > 0.0);           // elliptic on the sample grid
}

TEST_CASE("cgood pack: constant invariant measure and vanishing c-tensor") {
    const CoefficientPack p = builtin_cgood();
    CHECK(p.r.val(0.1, 0.9) == 1.0);
    CHECK(p.V.e11.val(0.25, 0.25) == Catch::Approx(-1.0 / (16.0 * pi * pi)).margin(1e-15));
    CHECK(p.c.max_abs() == 0.0);
    CHECK(p.spec.lambda > 0.0);
}

TEST_CASE("cbad: A equals rA / r pointwise and is symmetric-diagonal") {
    const CoefficientPack p = builtin_cbad();
    const double m = grid_max([&](double y1, double y2) {
        const SymMatrix2 a = p.spec.eval(y1, y2);
        const SymMatrix2 ra = p.rA.val(y1, y2);
        const double r = p.r.val(y1, y2);
        return std::max({std::fabs(a.a11 * r - ra.a11), std::fabs(a.a22 * r - ra.a22),
                         std::fabs(a.a12)});
    });
    CHECK(m < 1e-14);
}

TEST_CASE("invariant-measure residual D^2:(Ar) vanishes analytically") {
    for (const auto& p : {builtin_cbad(), builtin_cgood()}) {
        const double res = grid_max([&](double y1, double y2) {
            return p.rA.e11.d11(y1, y2) + 2.0 * p.rA.e12.d12(y1, y2) + p.rA.e22.d22(y1, y2);
        });
        INFO(p.name);
        CHECK(res < 1e-10);
    }
}

TEST_CASE("corrector residual -A:D^2 v - (a_kl - abar_kl) vanishes analytically") {
    for (const auto& p : {builtin_cbad(), builtin_cgood()}) {
        const ScalarForm* forms[3] = {&p.V.e11, &p.V.e12, &p.V.e22};
        const int kk[3] = {1, 1, 2}, ll[3] = {1, 2, 2};
        for (int q = 0; q < 3; ++q) {
            const ScalarForm& v = *forms[q];
            const double abar_kl =
                (kk[q] == 1 && ll[q] == 1) ? p.abar.a11 : (kk[q] == 2 ? p.abar.a22 : p.abar.a12);
            const double res = grid_max([&](double y1, double y2) {
                const SymMatrix2 a = p.spec.eval(y1, y2);
                const double lhs = -(a.a11 * v.d11(y1, y2) + 2.0 * a.a12 * v.d12(y1, y2) +
                                     a.a22 * v.d22(y1, y2));
                const double akl =
                    (kk[q] == 1 && ll[q] == 1) ? a.a11 : (kk[q] == 2 ? a.a22 : a.a12);
                return lhs - (akl - abar_kl);
            });
            INFO(p.name << " v" << kk[q] << ll[q]);
            CHECK(res < 1e-10);
        }
    }
}

TEST_CASE("sinsin: -Laplace(u) = f and -Laplace(z) = -d1 f/(128 pi) analytically") {
    const RhsPack p = builtin_rhs("sinsin");
    REQUIRE(p.has_u);
    REQUIRE(p.has_z);
    const double res_u = grid_max([&](double x1, double x2) {
        return -(p.u.d11(x1, x2) + p.u.d22(x1, x2)) - p.f.val(x1, x2);
    });
    CHECK(res_u < 1e-10);
    const double res_z = grid_max([&](double x1, double x2) {
        return -(p.z.d11(x1, x2) + p.z.d22(x1, x2)) + p.f.d1(x1, x2) / (128.0 * pi);
    });
    CHECK(res_z < 1e-10);
}

TEST_CASE("rhs pack values") {
    const RhsPack sinsin = builtin_rhs("sinsin");
    CHECK(sinsin.u.val(0.25, 0.25) == Catch::Approx(1.0).margin(1e-15));
    const RhsPack poly = builtin_rhs("poly");
    CHECK(poly.u.val(0.5, 0.5) == Catch::Approx(1.0 / 32.0).margin(1e-16));
    CHECK_FALSE(poly.has_z);
    const RhsPack cs = builtin_rhs("cubic-sine");
    CHECK_FALSE(cs.has_u);
    CHECK_FALSE(cs.has_z);
    // z vanishes on the boundary of the square
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        CHECK(std::fabs(sinsin.z.val(t, 0.0)) < 1e-15);
        CHECK(std::fabs(sinsin.z.val(t, 1.0)) < 1e-15);
        CHECK(std::fabs(sinsin.z.val(0.0, t)) < 1e-15);
        CHECK(std::fabs(sinsin.z.val(1.0, t)) < 1e-15);
    }
}

TEST_CASE("unknown rhs name is rejected with the valid list") {
    try {
        builtin_rhs("bogus");
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("sinsin") != std::string::npos);
        CHECK(msg.find("poly") != std::string::npos);
        CHECK(msg.find("cubic-sine") != std::string::npos);
    }
    CHECK_THROWS_AS(coefficient_by_name("bogus"), std::invalid_argument);
}

TEST_CASE("periodic closed forms repeat exactly across the unit cell") {
    const CoefficientPack cbad = builtin_cbad();
    const CoefficientPack cgood = builtin_cgood();
    // dyadic points: y and y+1 are both exactly representable
    for (int i = 0; i < 16; ++i) {
        const double y1 = i / 16.0;
        for (int j = 0; j < 16; ++j) {
            const double y2 = j / 16.0;
            CHECK(cbad.r.val(y1 + 1.0, y2) == cbad.r.val(y1, y2));
            CHECK(cbad.r.val(y1, y2 + 1.0) == cbad.r.val(y1, y2));
            CHECK(cbad.V.e22.val(y1 + 1.0, y2 + 1.0) == cbad.V.e22.val(y1, y2));
            CHECK(cbad.psi.val(y1 + 1.0, y2) == cbad.psi.val(y1, y2));
            CHECK(cgood.V.e11.val(y1, y2 + 1.0) == cgood.V.e11.val(y1, y2));
            const SymMatrix2 a = cbad.spec.eval(y1 + 1.0, y2);
            const SymMatrix2 b = cbad.spec.eval(y1, y2);
            CHECK(a.a11 == b.a11);
            CHECK(a.a22 == b.a22);
        }
    }
}

TEST_CASE("derivative evaluators match central differences at second order") {
    const CoefficientPack cbad = builtin_cbad();
    check_gradient_consistency(cbad.r, 1.0);
    check_gradient_consistency(cbad.V.e11, 1e-2);
    check_gradient_consistency(cbad.V.e22, 1e-1);
    check_gradient_consistency(cbad.psi, 1.0);
    const RhsPack sinsin = builtin_rhs("sinsin");
    check_gradient_consistency(sinsin.u, 10.0);
    check_gradient_consistency(sinsin.z, 1.0);
    const RhsPack cs = builtin_rhs("cubic-sine");
    check_gradient_consistency(cs.f, 1.0);
}

TEST_CASE("adiv carries the skew potential") {
    const CoefficientPack p = builtin_cbad();
    const Matrix22 a = p.adiv(0.3, 0.55);
    const SymMatrix2 ra = p.rA.val(0.3, 0.55);
    const double psi = p.psi.val(0.3, 0.55);
    CHECK(a.a11 == ra.a11);
    CHECK(a.a22 == ra.a22);
    CHECK(a.a12 == ra.a12 + psi);
    CHECK(a.a21 == ra.a12 - psi);
}
