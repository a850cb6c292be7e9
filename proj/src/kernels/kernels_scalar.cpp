#include "kcs/kernels.hpp"

namespace kcs::kernels {

namespace {

void caxpy_scalar(std::size_t n, cplx a, const cplx* x, cplx* y) {
    const double ar = a.real(), ai = a.imag();
    const double* xr = reinterpret_cast<const double*>(x);
    double* yr = reinterpret_cast<double*>(y);
    for (std::size_t i = 0; i < n; ++i) {
        const double re = xr[2 * i], im = xr[2 * i + 1];
        yr[2 * i] += ar * re - ai * im;
        yr[2 * i + 1] += ar * im + ai * re;
    }
}

void cscale_scalar(std::size_t n, cplx a, cplx* x) {
    const double ar = a.real(), ai = a.imag();
    double* xr = reinterpret_cast<double*>(x);
    for (std::size_t i = 0; i < n; ++i) {
        const double re = xr[2 * i], im = xr[2 * i + 1];
        xr[2 * i] = ar * re - ai * im;
        xr[2 * i + 1] = ar * im + ai * re;
    }
}

double cnorm2_scalar(std::size_t n, const cplx* x) {
    const double* xr = reinterpret_cast<const double*>(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < 2 * n; ++i) acc += xr[i] * xr[i];
    return acc;
}

cplx cdot_scalar(std::size_t n, const cplx* x, const cplx* y) {
    const double* xr = reinterpret_cast<const double*>(x);
    const double* yr = reinterpret_cast<const double*>(y);
    double accr = 0.0, acci = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double xre = xr[2 * i], xim = xr[2 * i + 1];
        const double yre = yr[2 * i], yim = yr[2 * i + 1];
        accr += xre * yre + xim * yim;
        acci += xre * yim - xim * yre;
    }
    return {accr, acci};
}

void raxpy_scalar(std::size_t n, double a, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double rsum_scalar(std::size_t n, const double* x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void dtwa_drift_scalar(std::size_t n, const double* sx, const double* sy, const double* sz,
                       double g, double a_re, double a_im, double p0, double alpha, double beta,
                       double gamma, double* dsx, double* dsy, double* dsz, double* f_re,
                       double* f_im) {
    double fr = 0.0, fi = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double nl = 0.5 * (1.0 + sz[j - 1]);
        const double nr = 0.5 * (1.0 + sz[j + 1]);
        const double nll = 0.5 * (1.0 + sz[j - 2]);
        const double nrr = 0.5 * (1.0 + sz[j + 2]);
        const double p = p0 + alpha * nl + beta * nr + gamma * nl * nr;
        const double c = (alpha + gamma * nrr) * (a_re * sx[j + 1] - a_im * sy[j + 1]) +
                         (beta + gamma * nll) * (a_re * sx[j - 1] - a_im * sy[j - 1]);
        const double gp = g * p;
        dsx[j] = -2.0 * gp * a_im * sz[j] - g * c * sy[j];
        dsy[j] = -2.0 * gp * a_re * sz[j] + g * c * sx[j];
        dsz[j] = 2.0 * gp * (a_im * sx[j] + a_re * sy[j]);
        fr += 0.5 * p * sx[j];
        fi -= 0.5 * p * sy[j];
    }
    *f_re = fr;
    *f_im = fi;
}

} // namespace

const Backend& scalar_backend() {
    static const Backend b{"scalar",       caxpy_scalar, cscale_scalar, cnorm2_scalar,
                           cdot_scalar,    raxpy_scalar, rsum_scalar,   dtwa_drift_scalar};
    return b;
}

} // namespace kcs::kernels
