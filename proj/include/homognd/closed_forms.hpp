#ifndef HOMOGND_CLOSED_FORMS_HPP
#define HOMOGND_CLOSED_FORMS_HPP

#include "homognd/grid.hpp"

namespace homognd {

/// A scalar field with hand-differentiated evaluators. Slots that are not
/// defined for a particular field are left empty; callers must check before
/// use. All builtin forms are exact to machine precision, which is what lets
/// them act as oracles for every discrete module.
struct ScalarForm {
    using Fn = std::function<double(double, double)>;
    Fn val;
    Fn d1, d2;
    Fn d11, d12, d22;
    Fn d111, d112, d122, d222;

    bool has_gradient() const { return d1 && d2; }
    bool has_hessian() const { return d11 && d12 && d22; }
    bool has_third() const { return d111 && d112 && d122 && d222; }

    static ScalarForm constant(double c) {
        ScalarForm f;
        auto zero = [](double, double) { return 0.0; };
        f.val = [c](double, double) { return c; };
        f.d1 = f.d2 = zero;
        f.d11 = f.d12 = f.d22 = zero;
        f.d111 = f.d112 = f.d122 = f.d222 = zero;
        return f;
    }
};

/// Symmetric matrix of scalar forms (e21 = e12 pointwise).
struct SymMatrixForm {
    ScalarForm e11, e12, e22;

    SymMatrix2 val(double y1, double y2) const {
        return {e11.val(y1, y2), e12.val(y1, y2), e22.val(y1, y2)};
    }
};

/// The six constants c_j^{kl}, j in {1,2}, (k,l) symmetric.
struct CTensor {
    double c1_11 = 0, c1_12 = 0, c1_22 = 0;
    double c2_11 = 0, c2_12 = 0, c2_22 = 0;

    double at(int j, int k, int l) const {
        if (k > l) std::swap(k, l);
        const double* row = (j == 1) ? &c1_11 : &c2_11;
        if (k == 1 && l == 1) return row[0];
        if (k == 1 && l == 2) return row[1];
        return row[2];
    }
    double max_abs() const {
        return std::max({std::fabs(c1_11), std::fabs(c1_12), std::fabs(c1_22),
                         std::fabs(c2_11), std::fabs(c2_12), std::fabs(c2_22)});
    }
};

/// Bundle of a builtin coefficient with every exact homogenization object the
/// paper's example carries. Serves as library input and as test oracle.
struct CoefficientPack {
    std::string name;
    CoefficientSpec spec;
    ScalarForm r;        // invariant measure
    SymMatrixForm rA;    // the product r*A (trigonometric; second derivatives defined)
    SymMatrixForm V;     // correctors v11, v12, v22 with gradients and Hessians
    ScalarForm psi;      // skew potential
    CTensor c;
    SymMatrix2 abar;
    bool constant = false;

    /// A^div = rA + [[0, psi], [-psi, 0]].
    Matrix22 adiv(double y1, double y2) const {
        const SymMatrix2 p = rA.val(y1, y2);
        const double s = psi.val(y1, y2);
        return {p.a11, p.a12 + s, p.a12 - s, p.a22};
    }
};

namespace detail {

// Reduced to one period before evaluating, so g(y + e_k) = g(y) holds
// bitwise whenever y and y + 1 are both representable (dyadic grid nodes).
inline double S(double t) { return std::sin(2.0 * pi * (t - std::floor(t))); }
inline double C(double t) { return std::cos(2.0 * pi * (t - std::floor(t))); }
inline double arg1(double x1) { return 2.0 * pi * x1 - pi; }

}  // namespace detail

/// Explicit c-bad coefficient:
///   A(y) = (1/r) diag(1 - s1*s2/2, 1 + s1*s2/2),
///   r(y) = 1 + (cos(2*pi*y1) - 2 sin(2*pi*y1)) sin(2*pi*y2) / 4,
/// with c1^11 = c1^22 = -1/(128*pi) and all other c_j^{kl} = 0.
inline CoefficientPack builtin_cbad() {
    using detail::C;
    using detail::S;
    CoefficientPack p;
    p.name = "cbad";

    p.r.val = [](double y1, double y2) {
        return 1.0 + 0.25 * (C(y1) - 2.0 * S(y1)) * S(y2);
    };
    p.r.d1 = [](double y1, double y2) {
        return 0.25 * 2.0 * pi * (-S(y1) - 2.0 * C(y1)) * S(y2);
    };
    p.r.d2 = [](double y1, double y2) {
        return 0.25 * 2.0 * pi * (C(y1) - 2.0 * S(y1)) * C(y2);
    };

    auto rv = p.r.val;
    p.spec = CoefficientSpec::from_function("cbad", [rv](double y1, double y2) {
        const double osc = 0.5 * S(y1) * S(y2);
        const double r = rv(y1, y2);
        return SymMatrix2{(1.0 - osc) / r, 0.0, (1.0 + osc) / r};
    });

    const double w2 = 4.0 * pi * pi;  // (2*pi)^2
    p.rA.e11.val = [](double y1, double y2) { return 1.0 - 0.5 * S(y1) * S(y2); };
    p.rA.e11.d1 = [](double y1, double y2) { return -pi * C(y1) * S(y2); };
    p.rA.e11.d2 = [](double y1, double y2) { return -pi * S(y1) * C(y2); };
    p.rA.e11.d11 = [w2](double y1, double y2) { return 0.5 * w2 * S(y1) * S(y2); };
    p.rA.e11.d12 = [w2](double y1, double y2) { return -0.5 * w2 * C(y1) * C(y2); };
    p.rA.e11.d22 = [w2](double y1, double y2) { return 0.5 * w2 * S(y1) * S(y2); };
    p.rA.e12 = ScalarForm::constant(0.0);
    p.rA.e22.val = [](double y1, double y2) { return 1.0 + 0.5 * S(y1) * S(y2); };
    p.rA.e22.d1 = [](double y1, double y2) { return pi * C(y1) * S(y2); };
    p.rA.e22.d2 = [](double y1, double y2) { return pi * S(y1) * C(y2); };
    p.rA.e22.d11 = [w2](double y1, double y2) { return -0.5 * w2 * S(y1) * S(y2); };
    p.rA.e22.d12 = [w2](double y1, double y2) { return 0.5 * w2 * C(y1) * C(y2); };
    p.rA.e22.d22 = [w2](double y1, double y2) { return -0.5 * w2 * S(y1) * S(y2); };

    // V(y) = -(sin(2*pi*y2)/(32*pi^2)) diag(cos(2*pi*y1), cos(2*pi*y1) - 4 sin(2*pi*y1))
    const double k = 1.0 / (32.0 * pi * pi);
    p.V.e11.val = [k](double y1, double y2) { return -k * S(y2) * C(y1); };
    p.V.e11.d1 = [](double y1, double y2) { return S(y1) * S(y2) / (16.0 * pi); };
    p.V.e11.d2 = [](double y1, double y2) { return -C(y1) * C(y2) / (16.0 * pi); };
    p.V.e11.d11 = [](double y1, double y2) { return C(y1) * S(y2) / 8.0; };
    p.V.e11.d12 = [](double y1, double y2) { return S(y1) * C(y2) / 8.0; };
    p.V.e11.d22 = [](double y1, double y2) { return C(y1) * S(y2) / 8.0; };
    p.V.e12 = ScalarForm::constant(0.0);
    p.V.e22.val = [k](double y1, double y2) { return -k * S(y2) * (C(y1) - 4.0 * S(y1)); };
    p.V.e22.d1 = [](double y1, double y2) {
        return S(y2) * (S(y1) + 4.0 * C(y1)) / (16.0 * pi);
    };
    p.V.e22.d2 = [](double y1, double y2) {
        return -C(y2) * (C(y1) - 4.0 * S(y1)) / (16.0 * pi);
    };
    p.V.e22.d11 = [](double y1, double y2) {
        return S(y2) * (C(y1) - 4.0 * S(y1)) / 8.0;
    };
    p.V.e22.d12 = [](double y1, double y2) {
        return C(y2) * (S(y1) + 4.0 * C(y1)) / 8.0;
    };
    p.V.e22.d22 = [](double y1, double y2) {
        return S(y2) * (C(y1) - 4.0 * S(y1)) / 8.0;
    };

    p.psi.val = [](double y1, double y2) { return 0.5 * C(y1) * C(y2); };
    p.psi.d1 = [](double y1, double y2) { return -pi * S(y1) * C(y2); };
    p.psi.d2 = [](double y1, double y2) { return -pi * C(y1) * S(y2); };

    p.c.c1_11 = -1.0 / (128.0 * pi);
    p.c.c1_22 = -1.0 / (128.0 * pi);
    p.abar = SymMatrix2::identity();
    return p;
}

/// The same oscillation without the 1/r factor; c-good (all c_j^{kl} = 0,
/// invariant measure identically one).
inline CoefficientPack builtin_cgood() {
    using detail::C;
    using detail::S;
    CoefficientPack p = builtin_cbad();
    p.name = "cgood";
    p.r = ScalarForm::constant(1.0);
    p.spec = CoefficientSpec::from_function("cgood", [](double y1, double y2) {
        const double osc = 0.5 * S(y1) * S(y2);
        return SymMatrix2{1.0 - osc, 0.0, 1.0 + osc};
    });
    // rA coincides with the c-bad product; A^div is shared between the packs.

    // V(y) = -(sin(2*pi*y1) sin(2*pi*y2)/(16*pi^2)) diag(1, -1)
    const double k = 1.0 / (16.0 * pi * pi);
    p.V.e11.val = [k](double y1, double y2) { return -k * S(y1) * S(y2); };
    p.V.e11.d1 = [](double y1, double y2) { return -C(y1) * S(y2) / (8.0 * pi); };
    p.V.e11.d2 = [](double y1, double y2) { return -S(y1) * C(y2) / (8.0 * pi); };
    p.V.e11.d11 = [](double y1, double y2) { return S(y1) * S(y2) / 4.0; };
    p.V.e11.d12 = [](double y1, double y2) { return -C(y1) * C(y2) / 4.0; };
    p.V.e11.d22 = [](double y1, double y2) { return S(y1) * S(y2) / 4.0; };
    p.V.e12 = ScalarForm::constant(0.0);
    p.V.e22.val = [k](double y1, double y2) { return k * S(y1) * S(y2); };
    p.V.e22.d1 = [](double y1, double y2) { return C(y1) * S(y2) / (8.0 * pi); };
    p.V.e22.d2 = [](double y1, double y2) { return S(y1) * C(y2) / (8.0 * pi); };
    p.V.e22.d11 = [](double y1, double y2) { return -S(y1) * S(y2) / 4.0; };
    p.V.e22.d12 = [](double y1, double y2) { return C(y1) * C(y2) / 4.0; };
    p.V.e22.d22 = [](double y1, double y2) { return -S(y1) * S(y2) / 4.0; };

    p.c = CTensor{};
    return p;
}

/// Constant coefficient: r = 1, V = 0, psi = 0, A^div = A, Abar = A.
inline CoefficientPack builtin_constant(SymMatrix2 a = SymMatrix2::identity(),
                                        std::string name = "constant-identity") {
    CoefficientPack p;
    p.name = name;
    p.spec = CoefficientSpec::from_function(name, [a](double, double) { return a; });
    p.r = ScalarForm::constant(1.0);
    p.rA.e11 = ScalarForm::constant(a.a11);
    p.rA.e12 = ScalarForm::constant(a.a12);
    p.rA.e22 = ScalarForm::constant(a.a22);
    p.V.e11 = ScalarForm::constant(0.0);
    p.V.e12 = ScalarForm::constant(0.0);
    p.V.e22 = ScalarForm::constant(0.0);
    p.psi = ScalarForm::constant(0.0);
    p.abar = a;
    p.constant = true;
    return p;
}

inline CoefficientPack coefficient_by_name(const std::string& name) {
    if (name == "cbad") return builtin_cbad();
    if (name == "cgood") return builtin_cgood();
    if (name == "constant-identity") return builtin_constant();
    throw std::invalid_argument("unknown coefficient '" + name +
                                "' (valid: cbad, cgood, constant-identity)");
}

/// Right-hand side bundle; u and z are present only where the paper gives
/// them in closed form.
struct RhsPack {
    std::string name;
    ScalarForm f;  // value and first derivatives
    bool has_u = false;
    ScalarForm u;  // through third derivatives
    bool has_z = false;
    ScalarForm z;  // value, gradient, Hessian
};

inline std::vector<std::string> builtin_rhs_names() { return {"sinsin", "poly", "cubic-sine"}; }

inline RhsPack builtin_rhs(const std::string& name) {
    using detail::C;
    using detail::S;
    RhsPack p;
    p.name = name;
    if (name == "sinsin") {
        // f = 8 pi^2 sin(2 pi x1) sin(2 pi x2), u = sin(2 pi x1) sin(2 pi x2)
        const double w = 2.0 * pi;
        p.f.val = [](double x1, double x2) { return 8.0 * pi * pi * S(x1) * S(x2); };
        p.f.d1 = [w](double x1, double x2) { return 8.0 * pi * pi * w * C(x1) * S(x2); };
        p.f.d2 = [w](double x1, double x2) { return 8.0 * pi * pi * w * S(x1) * C(x2); };
        p.has_u = true;
        p.u.val = [](double x1, double x2) { return S(x1) * S(x2); };
        p.u.d1 = [w](double x1, double x2) { return w * C(x1) * S(x2); };
        p.u.d2 = [w](double x1, double x2) { return w * S(x1) * C(x2); };
        p.u.d11 = [w](double x1, double x2) { return -w * w * S(x1) * S(x2); };
        p.u.d12 = [w](double x1, double x2) { return w * w * C(x1) * C(x2); };
        p.u.d22 = [w](double x1, double x2) { return -w * w * S(x1) * S(x2); };
        p.u.d111 = [w](double x1, double x2) { return -w * w * w * C(x1) * S(x2); };
        p.u.d112 = [w](double x1, double x2) { return -w * w * w * S(x1) * C(x2); };
        p.u.d122 = [w](double x1, double x2) { return -w * w * w * C(x1) * S(x2); };
        p.u.d222 = [w](double x1, double x2) { return -w * w * w * S(x1) * C(x2); };
        // z = (cosh(2 pi x1 - pi)/cosh(pi) - cos(2 pi x1)) sin(2 pi x2) / 64
        p.has_z = true;
        auto g = [](double x1) { return std::cosh(detail::arg1(x1)) / std::cosh(pi) - C(x1); };
        p.z.val = [g](double x1, double x2) { return g(x1) * S(x2) / 64.0; };
        p.z.d1 = [](double x1, double x2) {
            return (2.0 * pi * std::sinh(detail::arg1(x1)) / std::cosh(pi) + 2.0 * pi * S(x1)) *
                   S(x2) / 64.0;
        };
        p.z.d2 = [g](double x1, double x2) { return g(x1) * 2.0 * pi * C(x2) / 64.0; };
        p.z.d11 = [](double x1, double x2) {
            return 4.0 * pi * pi *
                   (std::cosh(detail::arg1(x1)) / std::cosh(pi) + C(x1)) * S(x2) / 64.0;
        };
        p.z.d12 = [](double x1, double x2) {
            return (2.0 * pi * std::sinh(detail::arg1(x1)) / std::cosh(pi) + 2.0 * pi * S(x1)) *
                   2.0 * pi * C(x2) / 64.0;
        };
        p.z.d22 = [g](double x1, double x2) {
            return -4.0 * pi * pi * g(x1) * S(x2) / 64.0;
        };
        return p;
    }
    if (name == "poly") {
        // f = x1(1-x1) + x2(1-x2), u = x1(1-x1) x2(1-x2) / 2
        auto q = [](double t) { return t * (1.0 - t); };
        auto qd = [](double t) { return 1.0 - 2.0 * t; };
        p.f.val = [q](double x1, double x2) { return q(x1) + q(x2); };
        p.f.d1 = [qd](double x1, double) { return qd(x1); };
        p.f.d2 = [qd](double, double x2) { return qd(x2); };
        p.has_u = true;
        p.u.val = [q](double x1, double x2) { return 0.5 * q(x1) * q(x2); };
        p.u.d1 = [q, qd](double x1, double x2) { return 0.5 * qd(x1) * q(x2); };
        p.u.d2 = [q, qd](double x1, double x2) { return 0.5 * q(x1) * qd(x2); };
        p.u.d11 = [q](double, double x2) { return -q(x2); };
        p.u.d12 = [qd](double x1, double x2) { return 0.5 * qd(x1) * qd(x2); };
        p.u.d22 = [q](double x1, double) { return -q(x1); };
        p.u.d111 = [](double, double) { return 0.0; };
        p.u.d112 = [qd](double, double x2) { return -qd(x2); };
        p.u.d122 = [qd](double x1, double) { return -qd(x1); };
        p.u.d222 = [](double, double) { return 0.0; };
        return p;
    }
    if (name == "cubic-sine") {
        // f = x1^3 (1-x1)^3 sin(2 pi (x1 - 2 x2)); no closed-form u or z.
        auto P = [](double t) {
            const double a = t * (1.0 - t);
            return a * a * a;
        };
        auto Pd = [](double t) {
            const double a = t * (1.0 - t);
            return 3.0 * a * a * (1.0 - 2.0 * t);
        };
        p.f.val = [P](double x1, double x2) {
            return P(x1) * std::sin(2.0 * pi * (x1 - 2.0 * x2));
        };
        p.f.d1 = [P, Pd](double x1, double x2) {
            const double a = 2.0 * pi * (x1 - 2.0 * x2);
            return Pd(x1) * std::sin(a) + P(x1) * 2.0 * pi * std::cos(a);
        };
        p.f.d2 = [P](double x1, double x2) {
            const double a = 2.0 * pi * (x1 - 2.0 * x2);
            return -4.0 * pi * P(x1) * std::cos(a);
        };
        return p;
    }
    std::string valid;
    for (const auto& n : builtin_rhs_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown rhs '" + name + "' (valid: " + valid + ")");
}

}  // namespace homognd

#endif  // HOMOGND_CLOSED_FORMS_HPP
