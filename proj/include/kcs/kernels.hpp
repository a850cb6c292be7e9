#pragma once

#include <complex>
#include <cstddef>

namespace kcs::kernels {

using cplx = std::complex<double>;

// Inner-loop primitives for the integrators. Every entry has a scalar
// reference implementation and (on x86-64 with AVX2) a vectorized variant;
// the active backend is chosen once at startup from CPU capabilities and can
// be overridden via force_backend() or the KCS_KERNELS environment variable
// ("scalar" or "avx2").
struct Backend {
    const char* name;

    // y += a * x
    void (*caxpy)(std::size_t n, cplx a, const cplx* x, cplx* y);
    // x *= a
    void (*cscale)(std::size_t n, cplx a, cplx* x);
    // sum_i |x_i|^2
    double (*cnorm2)(std::size_t n, const cplx* x);
    // sum_i conj(x_i) * y_i
    cplx (*cdot)(std::size_t n, const cplx* x, const cplx* y);
    // y += a * x, double arrays
    void (*raxpy)(std::size_t n, double a, const double* x, double* y);
    // sum_i x_i
    double (*rsum)(std::size_t n, const double* x);

    // Drift of the discrete-Wigner equations of motion for a constrained
    // chain coupled to one cavity mode, plus the accumulated polarization
    // sum_j P_j s_j^- (halved convention, s^- = (s^x - i s^y)/2).
    //
    // sx, sy, sz point at site 1 of halo-padded arrays: indices -2..n+1 are
    // readable, with the halo holding the periodic wrap. P_j = p0 + alpha
    // n_{j-1} + beta n_{j+1} + gamma n_{j-1} n_{j+1}, n = (1+s^z)/2; the
    // constant offset p0 carries the unconstrained case and never enters the
    // neighbor back-action term.
    void (*dtwa_drift)(std::size_t n, const double* sx, const double* sy, const double* sz,
                       double g, double a_re, double a_im, double p0, double alpha, double beta,
                       double gamma, double* dsx, double* dsy, double* dsz, double* f_re,
                       double* f_im);
};

const Backend& scalar_backend();
const Backend* avx2_backend(); // nullptr when unavailable

// Active backend for this process.
const Backend& active();
// Force a named backend ("scalar"/"avx2"); throws ConfigError on bad name or
// unsupported CPU. Intended for tests and the --kernels CLI escape hatch.
void force_backend(const char* name);

} // namespace kcs::kernels
