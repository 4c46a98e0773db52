// chi^{111} for the c-bad coefficient: finite-difference engine at N = 128
// against the dense spectral-collocation oracle at N = 64. The oracle input
// uses only closed forms (A, v11 derivatives, the exact c1^11).
#include <catch2/catch_amalgamated.hpp>

#include "homognd/cell.hpp"
#include "spectral_oracle.hpp"

using namespace homognd;

TEST_CASE("cbad chi111 matches the spectral-collocation oracle") {
    const CoefficientPack pack = builtin_cbad();
    const int n_oracle = 64;

    auto rhs = [&](double y1, double y2) {
        const SymMatrix2 a = pack.spec.eval(y1, y2);
        return a.a11 * pack.V.e11.d1(y1, y2) + a.a12 * pack.V.e11.d2(y1, y2) - pack.c.c1_11;
    };
    const Eigen::VectorXd oracle = testing::spectral_cell_solve(pack.spec, n_oracle, rhs);

    CellEngine eng(pack.spec, 128);
    const TorusField chi = eng.solve_chi(1, 1, 1);

    double max_diff = 0.0;
    for (int j = 0; j < n_oracle; ++j)
        for (int i = 0; i < n_oracle; ++i)
            max_diff = std::max(max_diff,
                                std::fabs(chi.at(2 * i, 2 * j) - oracle(j * n_oracle + i)));
    CHECK(max_diff < 1e-4);

    // frozen oracle probes (computed from this spectral solve)
    CHECK(oracle(0) == Catch::Approx(2.3997107687e-05).epsilon(1e-6));
    CHECK(oracle(24 * n_oracle + 16) == Catch::Approx(1.4855235799e-04).epsilon(1e-6));
    CHECK(std::fabs(oracle.mean()) < 1e-12);
}
