#pragma once

// Independent reference implementations used only by the tests.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

using Complex = std::complex<double>;

// Direct O(N^2) DFT with the negative-exponent, unnormalized convention.
inline std::vector<Complex> naive_dft(std::span<const Complex> x) {
    const std::size_t n = x.size();
    std::vector<Complex> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        Complex acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            // Reduce k*j mod n first so the angle stays accurate for large n.
            const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * j) % n) / static_cast<double>(n);
            acc += x[j] * Complex(std::cos(angle), std::sin(angle));
        }
        out[k] = acc;
    }
    return out;
}

// Direct double-sum 2D DFT over a row-major h x w grid.
inline std::vector<Complex> naive_dft2(int w, int h, std::span<const double> values) {
    std::vector<Complex> out(static_cast<std::size_t>(w) * h);
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            Complex acc = 0.0;
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const double angle = -2.0 * std::numbers::pi *
                                         (static_cast<double>((u * x) % w) / w + static_cast<double>((v * y) % h) / h);
                    acc += values[static_cast<std::size_t>(y) * w + x] * Complex(std::cos(angle), std::sin(angle));
                }
            }
            out[static_cast<std::size_t>(v) * w + u] = acc;
        }
    }
    return out;
}

// max |a - b| / max |b|, the relative error used throughout the tests.
template <class T>
double max_rel_error(const std::vector<T>& a, const std::vector<T>& b) {
    double diff = 0.0;
    double ref = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        ref = std::max(ref, std::abs(b[i]));
    }
    return ref > 0.0 ? diff / ref : diff;
}

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a, double fa, double b, double fb, double m,
                      double fm, double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1) +
           simpson(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1);
}

}  // namespace detail

// Adaptive Simpson quadrature.
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-14,
                        int max_depth = 60) {
    const double fa = f(a);
    const double fb = f(b);
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

// F-distribution CDF by integrating the density. The substitution x = u^2
// removes the x^(d1/2 - 1) singularity at zero for d1 = 1.
inline double f_cdf(double F, double d1, double d2) {
    if (F <= 0.0) return 0.0;
    const double log_norm = 0.5 * d1 * std::log(d1) + 0.5 * d2 * std::log(d2) -
                            (std::lgamma(0.5 * d1) + std::lgamma(0.5 * d2) - std::lgamma(0.5 * (d1 + d2)));
    auto integrand = [&](double u) {
        if (u <= 0.0) return d1 == 1.0 ? 2.0 * std::exp(log_norm - 0.5 * (d1 + d2) * std::log(d2)) : 0.0;
        const double x = u * u;
        const double log_pdf = log_norm + (0.5 * d1 - 1.0) * std::log(x) - 0.5 * (d1 + d2) * std::log(d2 + d1 * x);
        return 2.0 * u * std::exp(log_pdf);
    };
    // Split at a few points so the adaptive rule sees the peak.
    const double top = std::sqrt(F);
    double total = 0.0;
    const int pieces = 16;
    for (int i = 0; i < pieces; ++i) {
        total += integrate(integrand, top * i / pieces, top * (i + 1) / pieces, 1e-15);
    }
    return total;
}

}  // namespace oracle
