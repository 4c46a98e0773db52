#ifndef HOMOGND_TORUS_FFT_HPP
#define HOMOGND_TORUS_FFT_HPP

#include <fftw3.h>

#include <complex>
#include <mutex>

#include "homognd/grid.hpp"

namespace homognd {

namespace detail {
// FFTW plan creation/destruction is not thread-safe; execution is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

/// Spectral operations on the N x N torus used by the cell-problem engine:
/// inversion of the constant-coefficient operator -Abar:D_h^2 (the Krylov
/// preconditioner) and stream-function reconstruction for the divergence-form
/// transform. Plans are FFTW_ESTIMATE so results are bitwise reproducible.
/// An instance owns its buffers; do not share one across threads.
class SpectralTorus {
 public:
    explicit SpectralTorus(int n) : n_(n) {
        if (n < 8 || n % 2 != 0)
            throw std::invalid_argument("torus resolution must be even and at least 8");
        const size_t cplx_sz = static_cast<size_t>(n) * (n / 2 + 1);
        real_ = fftw_alloc_real(static_cast<size_t>(n) * n);
        cplx_ = fftw_alloc_complex(cplx_sz);
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        fwd_ = fftw_plan_dft_r2c_2d(n, n, real_, cplx_, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_c2r_2d(n, n, cplx_, real_, FFTW_ESTIMATE);
    }
    ~SpectralTorus() {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(real_);
        fftw_free(cplx_);
    }
    SpectralTorus(const SpectralTorus&) = delete;
    SpectralTorus& operator=(const SpectralTorus&) = delete;

    int n() const { return n_; }

    /// y = (-abar:D_h^2)^{-1} x with the mean (k = 0) mode zeroed. The symbol
    /// of the narrow/cross central stencils is strictly positive away from
    /// k = 0 for SPD abar, so this is well-defined on mean-zero fields.
    void solve_const_nondiv(const SymMatrix2& abar, const std::vector<double>& x,
                            std::vector<double>& y) {
        load(x);
        fftw_execute(fwd_);
        const double inv_h2 = static_cast<double>(n_) * n_;
        for (int k0 = 0; k0 < n_; ++k0) {
            const double t2 = 2.0 * pi * k0 / n_;
            const double s2h = std::sin(0.5 * t2), s2 = std::sin(t2);
            for (int k1 = 0; k1 <= n_ / 2; ++k1) {
                const double t1 = 2.0 * pi * k1 / n_;
                const double s1h = std::sin(0.5 * t1), s1 = std::sin(t1);
                const double sym =
                    inv_h2 * (4.0 * abar.a11 * s1h * s1h + 2.0 * abar.a12 * s1 * s2 +
                              4.0 * abar.a22 * s2h * s2h);
                fftw_complex& c = cplx_[static_cast<size_t>(k0) * (n_ / 2 + 1) + k1];
                if (k0 == 0 && k1 == 0) {
                    c[0] = c[1] = 0.0;
                } else {
                    c[0] /= sym;
                    c[1] /= sym;
                }
            }
        }
        fftw_execute(bwd_);
        store(y);
    }

    /// Least-squares stream function with respect to the central first
    /// differences: psi minimizing ||D2 psi - b1||^2 + ||D1 psi + b2||^2 in
    /// Fourier space. When D1 b1 + D2 b2 = 0 and the b-spectrum vanishes on
    /// the modes where both difference symbols do, the relations
    /// D2 psi = b1 and D1 psi = -b2 hold exactly. psi has zero mean.
    std::vector<double> stream_function(const std::vector<double>& b1,
                                        const std::vector<double>& b2) {
        const size_t cplx_sz = static_cast<size_t>(n_) * (n_ / 2 + 1);
        std::vector<std::complex<double>> B1(cplx_sz), B2(cplx_sz);
        load(b1);
        fftw_execute(fwd_);
        for (size_t k = 0; k < cplx_sz; ++k) B1[k] = {cplx_[k][0], cplx_[k][1]};
        load(b2);
        fftw_execute(fwd_);
        for (size_t k = 0; k < cplx_sz; ++k) B2[k] = {cplx_[k][0], cplx_[k][1]};

        const double h = 1.0 / n_;
        for (int k0 = 0; k0 < n_; ++k0) {
            const double s2 = std::sin(2.0 * pi * k0 / n_);
            for (int k1 = 0; k1 <= n_ / 2; ++k1) {
                const double s1 = std::sin(2.0 * pi * k1 / n_);
                const double div = s1 * s1 + s2 * s2;
                const size_t k = static_cast<size_t>(k0) * (n_ / 2 + 1) + k1;
                std::complex<double> psi_hat(0.0, 0.0);
                if (div > 1e-14) {
                    const std::complex<double> w = s1 * B2[k] - s2 * B1[k];
                    psi_hat = std::complex<double>(0.0, h) * w / div;
                }
                cplx_[k][0] = psi_hat.real();
                cplx_[k][1] = psi_hat.imag();
            }
        }
        fftw_execute(bwd_);
        std::vector<double> psi;
        store(psi);
        return psi;
    }

 private:
    void load(const std::vector<double>& x) {
        for (size_t i = 0; i < x.size(); ++i) real_[i] = x[i];
    }
    void store(std::vector<double>& y) {
        const size_t sz = static_cast<size_t>(n_) * n_;
        y.resize(sz);
        const double scale = 1.0 / static_cast<double>(sz);
        for (size_t i = 0; i < sz; ++i) y[i] = real_[i] * scale;
    }

    int n_;
    double* real_;
    fftw_complex* cplx_;
    fftw_plan fwd_, bwd_;
};

}  // namespace homognd

#endif  // HOMOGND_TORUS_FFT_HPP
