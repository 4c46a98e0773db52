// Oscillatory solve against the frozen Richardson oracle: same 5-point
// stencil at M = 2560 extrapolated with the M = 1280 solve
// (tests/tools/make_oracles.cpp). M = 640 exceeds the direct-solver
// threshold, so this also exercises the BiCGSTAB + incomplete-LU path.
#include <catch2/catch_amalgamated.hpp>

#include "homognd/dirichlet.hpp"

using namespace homognd;

TEST_CASE("cbad/sinsin eps=1/5 at M=640 matches the Richardson oracle to 3 digits") {
    const double oracle = -1.073198898097e-02;  // frozen from make_oracles

    const CoefficientPack pack = builtin_cbad();
    EpsProblem p;
    p.A = pack.spec;
    p.f = builtin_rhs("sinsin").f.val;
    p.epsilon = Epsilon::of_inverse(5);
    const GridFunction u = solve_eps(p, 640);
    const double probe = u.at(320, 160);

    const double half_ulp3 =
        0.5 * std::pow(10.0, std::floor(std::log10(std::fabs(oracle))) - 2.0);
    INFO("probe " << probe << " oracle " << oracle);
    CHECK(std::fabs(probe - oracle) <= half_ulp3);
}
