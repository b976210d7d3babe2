#pragma once

#include "core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace rhomix {

/** @brief Function on the window |z|_inf <= R of Z^n, zero outside; first coordinate slowest. */
struct ToeplitzKernel {
    int n = 1;
    int R = 0;
    std::vector<double> values;
    double tail_l1 = 0.0;  ///< certified l1 mass outside the window

    static ToeplitzKernel zeros(int n, int R)
    {
        ToeplitzKernel k;
        k.n = n;
        k.R = R;
        std::size_t sz = 1;
        for (int i = 0; i < n; ++i) sz *= std::size_t(2 * R + 1);
        k.values.assign(sz, 0.0);
        return k;
    }

    std::size_t side() const { return std::size_t(2 * R + 1); }

    bool in_window(const std::vector<int>& z) const
    {
        return std::all_of(z.begin(), z.end(), [&](int c) { return c >= -R && c <= R; });
    }

    std::size_t index(const std::vector<int>& z) const
    {
        std::size_t idx = 0;
        for (int c : z) idx = idx * side() + std::size_t(c + R);
        return idx;
    }

    std::vector<int> point(std::size_t idx) const
    {
        std::vector<int> z(static_cast<std::size_t>(n));
        for (int i = n; i-- > 0;) {
            z[std::size_t(i)] = int(idx % side()) - R;
            idx /= side();
        }
        return z;
    }

    double at(const std::vector<int>& z) const { return in_window(z) ? values[index(z)] : 0.0; }
    double& ref(const std::vector<int>& z) { return values[index(z)]; }

    double l1() const
    {
        KahanSum<double> s;
        for (double v : values) s.add(std::abs(v));
        return s.value();
    }
};

inline void validate(const ToeplitzKernel& a)
{
    require(a.n >= 1 && a.n <= 6, ErrorKind::invalid_input, "dimension must be in 1..6");
    require(a.R >= 0, ErrorKind::invalid_input, "window radius must be >= 0");
    std::size_t sz = 1;
    for (int i = 0; i < a.n; ++i) sz *= std::size_t(2 * a.R + 1);
    require(a.values.size() == sz, ErrorKind::invalid_input, "kernel window has the wrong number of values");
    for (double v : a.values) require(std::isfinite(v), ErrorKind::invalid_input, "kernel values must be finite");
    require(std::isfinite(a.tail_l1) && a.tail_l1 >= 0.0, ErrorKind::invalid_input, "tail mass must be >= 0");
}

/** Copy of `a` on the window of radius `R2` (truncating or zero-padding). */
inline ToeplitzKernel resize(const ToeplitzKernel& a, int R2)
{
    ToeplitzKernel out = ToeplitzKernel::zeros(a.n, R2);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (a.values[i] == 0.0) continue;
        auto z = a.point(i);
        if (out.in_window(z)) out.ref(z) = a.values[i];
    }
    return out;
}

/** Convolution u * a restricted to the window of radius `R_out`. */
inline ToeplitzKernel convolve(const ToeplitzKernel& u, const ToeplitzKernel& a, int R_out)
{
    require(u.n == a.n, ErrorKind::invalid_input, "convolution of kernels of different dimensions");
    ToeplitzKernel out = ToeplitzKernel::zeros(u.n, R_out);
    for (std::size_t j = 0; j < a.values.size(); ++j) {
        const double w = a.values[j];
        if (w == 0.0) continue;
        const auto y = a.point(j);
        std::vector<int> z(static_cast<std::size_t>(u.n));
        for (std::size_t i = 0; i < u.values.size(); ++i) {
            const double v = u.values[i];
            if (v == 0.0) continue;
            auto x = u.point(i);
            bool inside = true;
            for (int c = 0; c < u.n; ++c) {
                z[std::size_t(c)] = x[std::size_t(c)] + y[std::size_t(c)];
                if (z[std::size_t(c)] < -R_out || z[std::size_t(c)] > R_out) inside = false;
            }
            if (inside) out.ref(z) += v * w;
        }
    }
    return out;
}

struct ConvInverse {
    ToeplitzKernel b;              ///< B[a] on the computed window
    int terms = 0;                 ///< number of convolution powers summed
    double truncation_l1 = 0.0;    ///< certified l1 distance to the exact B[a]
    double identity_residual = 0.0;  ///< max |(delta - a) * (delta + b) - delta| on the inner window
};

inline constexpr std::size_t max_conv_points = std::size_t(2) << 20;

/**
 * B[a] = a + a*a + a*a*a + ..., the kernel b with (delta_0 - a) * (delta_0 + b) = delta_0.
 * The number of terms doubles until ||a||^{k+1} / (1 - ||a||) < tol; the window grows
 * with the support of the powers up to a point cap, beyond which dropped mass is counted.
 */
inline ConvInverse conv_inverse(const ToeplitzKernel& a, double tol = 1e-12)
{
    validate(a);
    const double norm = a.l1() + a.tail_l1;
    require(norm < 1.0, ErrorKind::invalid_input, "convolution inverse needs ||a||_1 < 1");
    ConvInverse out;
    if (norm == 0.0) {
        out.b = ToeplitzKernel::zeros(a.n, std::max(a.R, 1));
        return out;
    }
    int k = 1;
    while (std::pow(norm, k + 1) / (1.0 - norm) >= tol) k *= 2;
    out.terms = k;

    int R_max = a.R * k;
    auto points = [&](int R) { return std::pow(double(2 * R + 1), double(a.n)); };
    while (R_max > a.R && points(R_max) > double(max_conv_points)) --R_max;
    R_max = std::max(R_max, a.R);

    ToeplitzKernel power = a;
    ToeplitzKernel sum = resize(a, R_max);
    double dropped = 0.0;
    for (int j = 2; j <= k; ++j) {
        int R_next = std::min(power.R + a.R, R_max);
        // mass of the full power minus what fits in the window
        ToeplitzKernel next = convolve(power, a, R_next);
        double full = 0.0;
        for (std::size_t i = 0; i < power.values.size(); ++i) full += std::abs(power.values[i]);
        double kept = next.l1();
        dropped += std::max(0.0, full * a.l1() - kept);
        power = std::move(next);
        for (std::size_t i = 0; i < power.values.size(); ++i) {
            if (power.values[i] == 0.0) continue;
            sum.ref(power.point(i)) += power.values[i];
        }
    }
    out.b = std::move(sum);
    out.truncation_l1 = std::pow(norm, k + 1) / (1.0 - norm) + dropped + a.tail_l1 / sqr(1.0 - norm);

    // (delta - a) * (delta + b) - delta = b - a - a*b, checked where a*b is complete
    const int inner = out.b.R - a.R;
    if (inner >= 0) {
        ToeplitzKernel ab = convolve(out.b, a, inner);
        double worst = 0.0;
        for (std::size_t i = 0; i < ab.values.size(); ++i) {
            auto z = ab.point(i);
            worst = std::max(worst, std::abs(out.b.at(z) - a.at(z) - ab.values[i]));
        }
        out.identity_residual = worst;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Decay classification

enum class DecayClass { exponential, polynomial, inconclusive };

inline const char* decay_name(DecayClass c)
{
    switch (c) {
    case DecayClass::exponential: return "exponential";
    case DecayClass::polynomial: return "polynomial";
    case DecayClass::inconclusive: return "inconclusive";
    }
    return "?";
}

struct DecayFit {
    DecayClass cls = DecayClass::inconclusive;
    double rate = 0.0;      ///< exponential rate from log a ~ -rate r
    double exponent = 0.0;  ///< polynomial exponent from log a ~ -exponent log r
    double r2_exp = 0.0;
    double r2_poly = 0.0;
    int used_shells = 0;
};

/** Largest |value| on each shell |z|_inf = r, r = 0..R. */
inline std::vector<double> shell_profile(const ToeplitzKernel& a)
{
    std::vector<double> p(std::size_t(a.R + 1), 0.0);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        int r = 0;
        for (int c : a.point(i)) r = std::max(r, std::abs(c));
        p[std::size_t(r)] = std::max(p[std::size_t(r)], std::abs(a.values[i]));
    }
    return p;
}

namespace detail {

struct LineFit {
    double slope = 0.0;
    double r2 = 0.0;
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = double(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

} // namespace detail

/**
 * Fits a shell profile (value at shell r, r = 0, 1, ...) by log-linear and log-log
 * regressions. The first two shells and values below `floor` times the maximum are ignored.
 */
inline DecayFit decay_fit(const std::vector<double>& profile, double floor = 1e-10, double min_r2 = 0.9)
{
    require(profile.size() >= 12, ErrorKind::invalid_input, "decay fit needs at least 12 shells");
    double top = 0.0;
    for (double v : profile) top = std::max(top, std::abs(v));
    std::vector<double> r, lr, lv;
    for (std::size_t s = 2; s < profile.size(); ++s) {
        double v = std::abs(profile[s]);
        if (!(v > floor * top) || v <= 0.0) continue;
        r.push_back(double(s));
        lr.push_back(std::log(double(s)));
        lv.push_back(std::log(v));
    }
    DecayFit out;
    out.used_shells = int(r.size());
    if (r.size() < 5) return out;
    auto e = detail::least_squares(r, lv);
    auto p = detail::least_squares(lr, lv);
    out.rate = -e.slope;
    out.exponent = -p.slope;
    out.r2_exp = e.r2;
    out.r2_poly = p.r2;
    if (std::max(e.r2, p.r2) < min_r2)
        out.cls = DecayClass::inconclusive;
    else
        out.cls = e.r2 >= p.r2 ? DecayClass::exponential : DecayClass::polynomial;
    return out;
}

// ---------------------------------------------------------------------------
// Nearly diagonal matrices

struct BandedInverse {
    double A_prime = 0.0;
    double gamma_prime = 0.0;
    double A1 = 0.0;
    double gamma1 = 0.0;
};

/**
 * Constants with |(M^{-1})_ij| <= A' exp(-gamma' |i - j|) for every symmetric M with
 * r I <= M <= R I and |M_ij| <= A exp(-gamma |i - j|), independent of the size of M.
 */
inline BandedInverse banded_inverse_constants(double r, double R, double A, double gamma)
{
    require(r > 0.0 && r <= R && std::isfinite(R), ErrorKind::invalid_input, "need 0 < r <= R < inf");
    require(A >= 0.0 && std::isfinite(A), ErrorKind::invalid_input, "need 0 <= A < inf");
    require(gamma > 0.0 && std::isfinite(gamma), ErrorKind::invalid_input, "need gamma > 0");
    // rescale to R = 1; H = I - M / R has entries bounded by A / R + 1
    const double rs = r / R, AH = A / R + 1.0;
    BandedInverse out;
    out.gamma1 = gamma / 2.0;
    const double g = gamma, g1 = out.gamma1;
    out.A1 = (1.0 - std::exp(-2.0 * g)) * AH / ((1.0 - std::exp(-(g - g1))) * (1.0 - std::exp(-(g + g1))));
    const double lnA1 = std::log(out.A1);
    if (rs >= 1.0) {
        out.gamma_prime = g1;
        out.A_prime = (out.A1 / (out.A1 - 1.0) + 1.0) / R;
        return out;
    }
    const double L = std::abs(std::log1p(-rs));
    out.gamma_prime = L * g1 / (L + lnA1);
    out.A_prime = (out.A1 / (out.A1 - 1.0) + 1.0 / rs) / R;
    return out;
}

// ---------------------------------------------------------------------------
// Sub-invariant majorant for polynomial kernels

struct PhiSubinvariance {
    double d = 0.0;
    double rho = std::numeric_limits<double>::infinity();  ///< max of (phi_d * a) / phi_d on the test window
    bool certified = false;
    int test_radius = 0;
};

inline double phi_d(const std::vector<int>& z, double d, double alpha)
{
    double s = 0.0;
    for (int c : z) s += double(c) * double(c);
    return std::pow(std::max(std::sqrt(s), d), -alpha);
}

/**
 * Searches d (doubling from 1) such that phi_d * a <= rho phi_d with rho < 1 at every
 * point of the test window, where phi_d(z) = max(|z|, d)^{-alpha}.
 */
inline PhiSubinvariance phi_subinvariance(const ToeplitzKernel& a, double alpha, int test_radius, double d_max = 1024.0)
{
    validate(a);
    require(alpha > double(a.n), ErrorKind::invalid_input, "phi_d needs alpha > n");
    require(test_radius >= 1, ErrorKind::invalid_input, "test radius must be >= 1");
    PhiSubinvariance best;
    best.test_radius = test_radius;
    ToeplitzKernel window = ToeplitzKernel::zeros(a.n, test_radius);
    for (double d = 1.0; d <= d_max; d *= 2.0) {
        double worst = 0.0;
        for (std::size_t i = 0; i < window.values.size(); ++i) {
            auto z = window.point(i);
            double s = 0.0;
            std::vector<int> x(z.size());
            for (std::size_t j = 0; j < a.values.size(); ++j) {
                if (a.values[j] == 0.0) continue;
                auto y = a.point(j);
                for (std::size_t c = 0; c < z.size(); ++c) x[c] = z[c] - y[c];
                s += std::abs(a.values[j]) * phi_d(x, d, alpha);
            }
            worst = std::max(worst, s / phi_d(z, d, alpha));
        }
        if (worst < best.rho) {
            best.rho = worst;
            best.d = d;
        }
        if (worst < 1.0) {
            best.certified = true;
            break;
        }
    }
    return best;
}

} // namespace rhomix
