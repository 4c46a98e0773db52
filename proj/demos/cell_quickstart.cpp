// Minimal tour of the torus engine: solve the cell problems for the explicit
// c-bad coefficient and print the homogenization objects.
#include <cstdio>

#include "homognd/cell.hpp"
#include "homognd/closed_forms.hpp"

int main() {
    using namespace homognd;
    const CoefficientPack pack = builtin_cbad();
    CellEngine eng(pack.spec, 128);

    const TorusField& r = eng.invariant_measure();
    const SymMatrix2 abar = eng.effective_coefficient();
    const CTensor c = eng.c_tensor();

    std::printf("invariant measure: mean %.12f, min %.6f\n", r.mean(), r.min_value());
    std::printf("Abar = [%.8f %.8f; %.8f %.8f]\n", abar.a11, abar.a12, abar.a12, abar.a22);
    std::printf("c1^11 = %.8e   (exact -1/(128 pi) = %.8e)\n", c.c1_11, -1.0 / (128.0 * pi));
    std::printf("classification: %s\n",
                classify(c, abar.max_abs()) == Classification::c_bad ? "c-bad" : "c-good");
    return 0;
}
