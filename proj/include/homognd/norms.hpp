#ifndef HOMOGND_NORMS_HPP
#define HOMOGND_NORMS_HPP

#include "homognd/grid.hpp"

namespace homognd {

/// Quadrature-node selector on the (M+1)^2 grid. A cell contributes to an
/// L^p integral only when all four of its corners are selected.
struct NodeMask {
    int m = 0;
    std::vector<uint8_t> on;

    static NodeMask full(int m) {
        NodeMask mk;
        mk.m = m;
        mk.on.assign(static_cast<size_t>(m + 1) * (m + 1), 1);
        return mk;
    }
    /// Nodes at distance >= `cells` grid cells from the boundary.
    static NodeMask interior(int m, int cells = 1) {
        NodeMask mk;
        mk.m = m;
        mk.on.assign(static_cast<size_t>(m + 1) * (m + 1), 0);
        for (int j = cells; j <= m - cells; ++j)
            for (int i = cells; i <= m - cells; ++i)
                mk.on[static_cast<size_t>(j) * (m + 1) + i] = 1;
        return mk;
    }
    bool at(int i, int j) const { return on[static_cast<size_t>(j) * (m + 1) + i] != 0; }
};

/// Composite trapezoidal L^p norm over the masked cells, p in (1, inf).
inline double lp_norm(const std::vector<double>& field, int m, double p, const NodeMask& mask) {
    if (!(p > 1.0) || !std::isfinite(p))
        throw std::invalid_argument("lp_norm: p must lie in (1, inf)");
    if (field.size() != static_cast<size_t>(m + 1) * (m + 1) || mask.m != m)
        throw std::invalid_argument("lp_norm: field/mask resolution mismatch");
    const double h2 = 1.0 / (static_cast<double>(m) * m);
    auto idx = [m](int i, int j) { return static_cast<size_t>(j) * (m + 1) + i; };
    double sum = 0.0;
    size_t cells = 0;
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
            if (!(mask.at(i, j) && mask.at(i + 1, j) && mask.at(i, j + 1) &&
                  mask.at(i + 1, j + 1)))
                continue;
            const double q = std::pow(std::fabs(field[idx(i, j)]), p) +
                             std::pow(std::fabs(field[idx(i + 1, j)]), p) +
                             std::pow(std::fabs(field[idx(i, j + 1)]), p) +
                             std::pow(std::fabs(field[idx(i + 1, j + 1)]), p);
            sum += 0.25 * h2 * q;
            ++cells;
        }
    if (cells == 0) throw std::invalid_argument("lp_norm: mask selects no complete cell");
    return std::pow(sum, 1.0 / p);
}

inline double sup_norm(const std::vector<double>& field) {
    double s = 0.0;
    for (double v : field) s = std::max(s, std::fabs(v));
    return s;
}

/// Discrete W^{1,p} norm (|g|_p^p + |grad g|_p^p)^{1/p} from precomputed
/// gradient magnitude.
inline double w1p_norm(const std::vector<double>& values,
                       const std::vector<double>& grad_magnitude, int m, double p,
                       const NodeMask& mask) {
    const double a = lp_norm(values, m, p, mask);
    const double b = lp_norm(grad_magnitude, m, p, mask);
    return std::pow(std::pow(a, p) + std::pow(b, p), 1.0 / p);
}

}  // namespace homognd

#endif  // HOMOGND_NORMS_HPP
