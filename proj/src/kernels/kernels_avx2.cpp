// AVX2 + FMA variants of the inner-loop kernels. This translation unit is
// compiled with -mavx2 -mfma on x86-64 only; callers must go through the
// dispatch table, which checks CPU support at runtime.
#include "kcs/kernels.hpp"

#include <immintrin.h>

namespace kcs::kernels {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

void caxpy_avx2(std::size_t n, cplx a, const cplx* x, cplx* y) {
    const __m256d ar = _mm256_set1_pd(a.real());
    const __m256d ai = _mm256_set1_pd(a.imag());
    const double* xp = reinterpret_cast<const double*>(x);
    double* yp = reinterpret_cast<double*>(y);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d xv = _mm256_loadu_pd(xp + 2 * i);
        const __m256d xs = _mm256_permute_pd(xv, 0b0101);
        const __m256d yv = _mm256_loadu_pd(yp + 2 * i);
        const __m256d prod = _mm256_fmaddsub_pd(xv, ar, _mm256_mul_pd(xs, ai));
        _mm256_storeu_pd(yp + 2 * i, _mm256_add_pd(yv, prod));
    }
    for (; i < n; ++i) {
        const double re = xp[2 * i], im = xp[2 * i + 1];
        yp[2 * i] += a.real() * re - a.imag() * im;
        yp[2 * i + 1] += a.real() * im + a.imag() * re;
    }
}

void cscale_avx2(std::size_t n, cplx a, cplx* x) {
    const __m256d ar = _mm256_set1_pd(a.real());
    const __m256d ai = _mm256_set1_pd(a.imag());
    double* xp = reinterpret_cast<double*>(x);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d xv = _mm256_loadu_pd(xp + 2 * i);
        const __m256d xs = _mm256_permute_pd(xv, 0b0101);
        _mm256_storeu_pd(xp + 2 * i, _mm256_fmaddsub_pd(xv, ar, _mm256_mul_pd(xs, ai)));
    }
    for (; i < n; ++i) {
        const double re = xp[2 * i], im = xp[2 * i + 1];
        xp[2 * i] = a.real() * re - a.imag() * im;
        xp[2 * i + 1] = a.real() * im + a.imag() * re;
    }
}

double cnorm2_avx2(std::size_t n, const cplx* x) {
    const double* xp = reinterpret_cast<const double*>(x);
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    const std::size_t m = 2 * n;
    for (; i + 8 <= m; i += 8) {
        const __m256d v0 = _mm256_loadu_pd(xp + i);
        const __m256d v1 = _mm256_loadu_pd(xp + i + 4);
        acc0 = _mm256_fmadd_pd(v0, v0, acc0);
        acc1 = _mm256_fmadd_pd(v1, v1, acc1);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < m; ++i) acc += xp[i] * xp[i];
    return acc;
}

cplx cdot_avx2(std::size_t n, const cplx* x, const cplx* y) {
    const double* xp = reinterpret_cast<const double*>(x);
    const double* yp = reinterpret_cast<const double*>(y);
    const __m256d signs = _mm256_set_pd(-0.0, 0.0, -0.0, 0.0);
    __m256d accr = _mm256_setzero_pd();
    __m256d acci = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d xv = _mm256_loadu_pd(xp + 2 * i);
        const __m256d yv = _mm256_loadu_pd(yp + 2 * i);
        accr = _mm256_fmadd_pd(xv, yv, accr);
        const __m256d ys = _mm256_permute_pd(yv, 0b0101);
        const __m256d t = _mm256_xor_pd(_mm256_mul_pd(xv, ys), signs);
        acci = _mm256_add_pd(acci, t);
    }
    double r = hsum(accr), im = hsum(acci);
    for (; i < n; ++i) {
        const double xre = xp[2 * i], xim = xp[2 * i + 1];
        const double yre = yp[2 * i], yim = yp[2 * i + 1];
        r += xre * yre + xim * yim;
        im += xre * yim - xim * yre;
    }
    return {r, im};
}

void raxpy_avx2(std::size_t n, double a, const double* x, double* y) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d r = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, r);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

double rsum_avx2(std::size_t n, const double* x) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double r = hsum(acc);
    for (; i < n; ++i) r += x[i];
    return r;
}

void dtwa_drift_avx2(std::size_t n, const double* sx, const double* sy, const double* sz,
                     double g, double a_re, double a_im, double p0, double alpha, double beta,
                     double gamma, double* dsx, double* dsy, double* dsz, double* f_re,
                     double* f_im) {
    const __m256d half = _mm256_set1_pd(0.5);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d vp0 = _mm256_set1_pd(p0);
    const __m256d va = _mm256_set1_pd(alpha);
    const __m256d vb = _mm256_set1_pd(beta);
    const __m256d vg = _mm256_set1_pd(gamma);
    const __m256d var_ = _mm256_set1_pd(a_re);
    const __m256d vai = _mm256_set1_pd(a_im);
    const __m256d vgc = _mm256_set1_pd(g);
    __m256d fr = _mm256_setzero_pd();
    __m256d fi = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        const __m256d zl = _mm256_loadu_pd(sz + j - 1);
        const __m256d zr = _mm256_loadu_pd(sz + j + 1);
        const __m256d zll = _mm256_loadu_pd(sz + j - 2);
        const __m256d zrr = _mm256_loadu_pd(sz + j + 2);
        const __m256d nl = _mm256_mul_pd(half, _mm256_add_pd(one, zl));
        const __m256d nr = _mm256_mul_pd(half, _mm256_add_pd(one, zr));
        const __m256d nll = _mm256_mul_pd(half, _mm256_add_pd(one, zll));
        const __m256d nrr = _mm256_mul_pd(half, _mm256_add_pd(one, zrr));
        const __m256d p = _mm256_fmadd_pd(
            va, nl,
            _mm256_fmadd_pd(vb, nr, _mm256_fmadd_pd(vg, _mm256_mul_pd(nl, nr), vp0)));
        const __m256d xl = _mm256_loadu_pd(sx + j - 1);
        const __m256d xr = _mm256_loadu_pd(sx + j + 1);
        const __m256d yl = _mm256_loadu_pd(sy + j - 1);
        const __m256d yr = _mm256_loadu_pd(sy + j + 1);
        const __m256d rotr = _mm256_fmsub_pd(var_, xr, _mm256_mul_pd(vai, yr));
        const __m256d rotl = _mm256_fmsub_pd(var_, xl, _mm256_mul_pd(vai, yl));
        const __m256d c = _mm256_fmadd_pd(_mm256_fmadd_pd(vg, nrr, va), rotr,
                                          _mm256_mul_pd(_mm256_fmadd_pd(vg, nll, vb), rotl));
        const __m256d xv = _mm256_loadu_pd(sx + j);
        const __m256d yv = _mm256_loadu_pd(sy + j);
        const __m256d zv = _mm256_loadu_pd(sz + j);
        const __m256d gp = _mm256_mul_pd(vgc, p);
        const __m256d gc = _mm256_mul_pd(vgc, c);
        const __m256d two = _mm256_set1_pd(2.0);
        const __m256d gp2 = _mm256_mul_pd(two, gp);
        _mm256_storeu_pd(dsx + j,
                         _mm256_fnmadd_pd(_mm256_mul_pd(gp2, vai), zv, _mm256_mul_pd(
                             _mm256_sub_pd(_mm256_setzero_pd(), gc), yv)));
        _mm256_storeu_pd(dsy + j,
                         _mm256_fnmadd_pd(_mm256_mul_pd(gp2, var_), zv, _mm256_mul_pd(gc, xv)));
        _mm256_storeu_pd(dsz + j,
                         _mm256_mul_pd(gp2, _mm256_fmadd_pd(vai, xv, _mm256_mul_pd(var_, yv))));
        fr = _mm256_fmadd_pd(_mm256_mul_pd(half, p), xv, fr);
        fi = _mm256_fnmadd_pd(_mm256_mul_pd(half, p), yv, fi);
    }
    double frs = hsum(fr), fis = hsum(fi);
    for (; j < n; ++j) {
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
        frs += 0.5 * p * sx[j];
        fis -= 0.5 * p * sy[j];
    }
    *f_re = frs;
    *f_im = fis;
}

} // namespace

const Backend* avx2_backend() {
    if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma")) return nullptr;
    static const Backend b{"avx2",     caxpy_avx2, cscale_avx2, cnorm2_avx2,
                           cdot_avx2,  raxpy_avx2, rsum_avx2,   dtwa_drift_avx2};
    return &b;
}

} // namespace kcs::kernels
