#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "useg/common.hpp"

namespace useg {
namespace dsp {

using cplx = std::complex<double>;

namespace detail {

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, in place.
inline void fft_pow2(std::vector<cplx>& a, bool inverse) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * std::numbers::pi / double(len) * (inverse ? 1.0 : -1.0);
        const cplx wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                const cplx u = a[i + j];
                const cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= double(n);
}

}  // namespace detail

// DFT of arbitrary length. Power-of-two sizes run directly; other sizes go
// through Bluestein's chirp-z reduction.
inline void fft(std::vector<cplx>& a, bool inverse = false) {
    const size_t n = a.size();
    if (n <= 1) return;
    if (detail::is_pow2(n)) {
        detail::fft_pow2(a, inverse);
        return;
    }
    size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;
    std::vector<cplx> w(n);
    const double sign = inverse ? 1.0 : -1.0;
    for (size_t k = 0; k < n; ++k) {
        // k^2 mod 2n avoids precision loss for large k
        const size_t k2 = (static_cast<unsigned long long>(k) * k) % (2 * n);
        const double ang = sign * std::numbers::pi * double(k2) / double(n);
        w[k] = cplx(std::cos(ang), std::sin(ang));
    }
    std::vector<cplx> x(m, cplx(0, 0)), y(m, cplx(0, 0));
    for (size_t k = 0; k < n; ++k) x[k] = a[k] * w[k];
    y[0] = std::conj(w[0]);
    for (size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(w[k]);
    detail::fft_pow2(x, false);
    detail::fft_pow2(y, false);
    for (size_t k = 0; k < m; ++k) x[k] *= y[k];
    detail::fft_pow2(x, true);
    for (size_t k = 0; k < n; ++k) a[k] = x[k] * w[k];
    if (inverse)
        for (auto& v : a) v /= double(n);
}

// Fourier-method resampling of one real channel from `n` to `m` samples:
// truncate or zero-pad the spectrum, with Nyquist-bin splitting/folding so the
// output stays real and band-limited amplitudes are preserved.
inline std::vector<double> resample_fourier(const std::vector<double>& x, size_t m) {
    const size_t n = x.size();
    if (n == 0 || m == 0) return std::vector<double>(m, 0.0);
    if (m == n) return x;

    std::vector<cplx> X(n);
    for (size_t i = 0; i < n; ++i) X[i] = cplx(x[i], 0.0);
    fft(X, false);

    std::vector<cplx> Y(m, cplx(0, 0));
    const size_t keep = std::min(n, m);
    const size_t pos = (keep + 1) / 2;  // positive-frequency bins excluding Nyquist
    for (size_t k = 0; k < pos; ++k) Y[k] = X[k];
    for (size_t k = 1; k < (keep + 1) / 2; ++k) Y[m - k] = X[n - k];
    if (keep % 2 == 0) {
        const size_t h = keep / 2;
        if (m > n) {
            Y[h] = X[h] * 0.5;
            Y[m - h] = X[h] * 0.5;
        } else {
            Y[h] = X[h] + X[n - h];
        }
    }

    fft(Y, true);
    std::vector<double> out(m);
    const double gain = double(m) / double(n);
    for (size_t i = 0; i < m; ++i) out[i] = Y[i].real() * gain;
    return out;
}

// ---------------------------------------------------------------------------
// IIR biquads (RBJ cookbook) and zero-phase filtering
// ---------------------------------------------------------------------------

struct Biquad {
    double b0, b1, b2, a1, a2;  // normalized so a0 == 1
};

inline Biquad biquad_lowpass(double fc, double fs, double q) {
    const double w0 = 2.0 * std::numbers::pi * fc / fs;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double c = std::cos(w0);
    const double a0 = 1.0 + alpha;
    return {(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0, -2.0 * c / a0,
            (1.0 - alpha) / a0};
}

inline Biquad biquad_highpass(double fc, double fs, double q) {
    const double w0 = 2.0 * std::numbers::pi * fc / fs;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double c = std::cos(w0);
    const double a0 = 1.0 + alpha;
    return {(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0, -2.0 * c / a0,
            (1.0 - alpha) / a0};
}

inline Biquad biquad_notch(double fc, double fs, double q) {
    const double w0 = 2.0 * std::numbers::pi * fc / fs;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double c = std::cos(w0);
    const double a0 = 1.0 + alpha;
    return {1.0 / a0, -2.0 * c / a0, 1.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
}

// Butterworth band edges as biquad cascades. An order-4 section pair uses the
// standard pole quality factors 1/(2 cos(pi/8)) and 1/(2 cos(3pi/8)).
inline std::vector<Biquad> butterworth4_lowpass(double fc, double fs) {
    const double q1 = 1.0 / (2.0 * std::cos(std::numbers::pi / 8.0));
    const double q2 = 1.0 / (2.0 * std::cos(3.0 * std::numbers::pi / 8.0));
    return {biquad_lowpass(fc, fs, q1), biquad_lowpass(fc, fs, q2)};
}

inline std::vector<Biquad> butterworth4_highpass(double fc, double fs) {
    const double q1 = 1.0 / (2.0 * std::cos(std::numbers::pi / 8.0));
    const double q2 = 1.0 / (2.0 * std::cos(3.0 * std::numbers::pi / 8.0));
    return {biquad_highpass(fc, fs, q1), biquad_highpass(fc, fs, q2)};
}

inline void biquad_apply(const Biquad& f, std::vector<double>& x) {
    double z1 = 0.0, z2 = 0.0;  // direct form II transposed
    for (double& v : x) {
        const double in = v;
        const double out = f.b0 * in + z1;
        z1 = f.b1 * in - f.a1 * out + z2;
        z2 = f.b2 * in - f.a2 * out;
        v = out;
    }
}

// Forward-backward application of a second-order-section cascade with odd
// reflection padding, so the net filter has zero phase.
inline std::vector<double> filtfilt(const std::vector<Biquad>& sos, const std::vector<double>& x,
                                    size_t padlen) {
    const size_t n = x.size();
    if (n == 0) return {};
    padlen = std::min(padlen, n - 1);

    std::vector<double> ext;
    ext.reserve(n + 2 * padlen);
    for (size_t i = padlen; i > 0; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (size_t i = 1; i <= padlen; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    for (const auto& f : sos) biquad_apply(f, ext);
    std::reverse(ext.begin(), ext.end());
    for (const auto& f : sos) biquad_apply(f, ext);
    std::reverse(ext.begin(), ext.end());

    return std::vector<double>(ext.begin() + padlen, ext.begin() + padlen + n);
}

}  // namespace dsp
}  // namespace useg
