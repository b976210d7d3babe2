#pragma once

#include "core.hpp"
#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <vector>

namespace rhomix {

inline void validate_eps(double e)
{
    require(std::isfinite(e) && e >= 0.0 && e <= 1.0, ErrorKind::invalid_input, "epsilon entries must lie in [0,1]");
}

/** sqrt(1 - prod(1 - eps_i^2)); the empty product gives 0. */
inline double simple_bound(const std::vector<double>& eps)
{
    double logprod = 0.0;
    for (double e : eps) {
        validate_eps(e);
        if (e >= 1.0) return 1.0;
        logprod += std::log1p(-e * e);
    }
    return std::sqrt(std::max(0.0, -std::expm1(logprod)));
}

inline void validate_eps_matrix(const Matrix& eps)
{
    for (Index i = 0; i < eps.rows(); ++i)
        for (Index j = 0; j < eps.cols(); ++j) validate_eps(eps(i, j));
}

/** Operator norm of the epsilon matrix, without clamping. */
inline double nm_norm(const Matrix& eps)
{
    validate_eps_matrix(eps);
    return spectral_norm(eps);
}

inline double nm_bound(const Matrix& eps) { return std::min(nm_norm(eps), 1.0); }

/** sin(min(sum arcsin eps, pi/2)) with compensated summation. */
inline double zz_bound(const std::vector<double>& eps)
{
    KahanSum<double> s;
    for (double e : eps) {
        validate_eps(e);
        s.add(std::asin(e));
    }
    return std::sin(std::min(s.value(), std::numbers::pi / 2));
}

// ---------------------------------------------------------------------------
// Translation-invariant kernels on Z^n

enum class LatticeNorm { l1, l2, linf };

struct TailModel {
    enum class Kind { none, exponential, polynomial };
    Kind kind = Kind::none;
    double C = 0.0;
    double rate = 0.0;  ///< psi for exponential, alpha for polynomial
};

/**
 * @brief eps(z) on the window |z|_inf <= R, plus an optional majorant beyond it.
 * A window declared complete means eps vanishes outside it.
 */
struct LatticeKernel {
    int n = 1;
    int R = 0;
    LatticeNorm norm = LatticeNorm::linf;
    std::vector<double> values;  ///< (2R+1)^n entries, first coordinate slowest
    TailModel tail;
    bool complete = true;

    static LatticeKernel zeros(int n, int R)
    {
        LatticeKernel k;
        k.n = n;
        k.R = R;
        std::size_t sz = 1;
        for (int i = 0; i < n; ++i) sz *= std::size_t(2 * R + 1);
        k.values.assign(sz, 0.0);
        return k;
    }

    std::size_t index(const std::vector<int>& z) const
    {
        std::size_t idx = 0;
        for (int c : z) idx = idx * std::size_t(2 * R + 1) + std::size_t(c + R);
        return idx;
    }

    bool in_window(const std::vector<int>& z) const
    {
        for (int c : z)
            if (c < -R || c > R) return false;
        return true;
    }

    double& at(const std::vector<int>& z) { return values[index(z)]; }
    double at(const std::vector<int>& z) const { return values[index(z)]; }

    std::vector<int> point(std::size_t idx) const
    {
        std::vector<int> z(static_cast<std::size_t>(n));
        for (int i = n; i-- > 0;) {
            z[std::size_t(i)] = int(idx % std::size_t(2 * R + 1)) - R;
            idx /= std::size_t(2 * R + 1);
        }
        return z;
    }

    /** Set eps(z) and eps(-z). */
    void set_symmetric(const std::vector<int>& z, double v)
    {
        at(z) = v;
        std::vector<int> m = z;
        for (int& c : m) c = -c;
        at(m) = v;
    }
};

inline double lattice_norm(const std::vector<int>& z, LatticeNorm norm)
{
    double s = 0.0;
    switch (norm) {
    case LatticeNorm::l1:
        for (int c : z) s += std::abs(c);
        return s;
    case LatticeNorm::l2:
        for (int c : z) s += double(c) * double(c);
        return std::sqrt(s);
    case LatticeNorm::linf:
        for (int c : z) s = std::max(s, double(std::abs(c)));
        return s;
    }
    return s;
}

inline void validate(const LatticeKernel& k)
{
    require(k.n >= 1 && k.n <= 6, ErrorKind::invalid_input, "lattice dimension must be in 1..6");
    require(k.R >= 0, ErrorKind::invalid_input, "window radius must be >= 0");
    std::size_t sz = 1;
    for (int i = 0; i < k.n; ++i) sz *= std::size_t(2 * k.R + 1);
    require(k.values.size() == sz, ErrorKind::invalid_input, "kernel window has the wrong number of values");
    for (std::size_t i = 0; i < sz; ++i) {
        validate_eps(k.values[i]);
        std::vector<int> z = k.point(i);
        for (int& c : z) c = -c;
        require(std::abs(k.at(z) - k.values[i]) <= 1e-12, ErrorKind::invalid_input, "kernel must be symmetric");
    }
    if (k.tail.kind != TailModel::Kind::none) {
        require(k.tail.C >= 0.0 && k.tail.rate >= 0.0 && std::isfinite(k.tail.C) && std::isfinite(k.tail.rate),
                ErrorKind::invalid_input, "tail parameters must be nonnegative");
        if (k.tail.kind == TailModel::Kind::exponential)
            require(k.tail.rate > 0.0 || k.tail.C == 0.0, ErrorKind::invalid_input, "exponential tail needs psi > 0");
        if (k.tail.kind == TailModel::Kind::polynomial)
            require(k.tail.rate > double(k.n) || k.tail.C == 0.0, ErrorKind::invalid_input,
                    "polynomial tail needs alpha > n to be summable");
    }
    require(k.complete || k.tail.kind != TailModel::Kind::none, ErrorKind::tail_missing,
            "incomplete window needs a tail model");
}

/** Tail majorant at z (outside the window), clamped to 1. */
inline double tail_value(const LatticeKernel& k, const std::vector<int>& z)
{
    double r = lattice_norm(z, k.norm);
    switch (k.tail.kind) {
    case TailModel::Kind::none: return 0.0;
    case TailModel::Kind::exponential: return std::min(1.0, k.tail.C * std::exp(-k.tail.rate * r));
    case TailModel::Kind::polynomial: return r > 0 ? std::min(1.0, k.tail.C * std::pow(r, -k.tail.rate)) : 1.0;
    }
    return 0.0;
}

/** Certified bound on the sum of the tail majorant over |z|_inf > R2. */
inline double tail_remainder(const LatticeKernel& k, int R2)
{
    const double n = double(k.n);
    switch (k.tail.kind) {
    case TailModel::Kind::none: return 0.0;
    case TailModel::Kind::exponential: {
        if (k.tail.C == 0.0) return 0.0;
        double psi = k.tail.rate;
        if (k.norm == LatticeNorm::linf) psi /= n;
        if (k.norm == LatticeNorm::l2) psi /= std::sqrt(n);
        double q = std::exp(-psi);
        double one_dim_tail = 2.0 * std::exp(-psi * double(R2 + 1)) / (1.0 - q);
        double full = (1.0 + q) / (1.0 - q);
        return k.tail.C * n * one_dim_tail * std::pow(full, n - 1.0);
    }
    case TailModel::Kind::polynomial: {
        if (k.tail.C == 0.0) return 0.0;
        double a = k.tail.rate;
        double r2 = std::max(1.0, double(R2));
        return 2.0 * n * std::pow(3.0, n - 1.0) * k.tail.C * std::pow(r2, n - a) / (a - n);
    }
    }
    return 0.0;
}

/** Largest majorant value over |z|_inf > R2. */
inline double tail_sup(const LatticeKernel& k, int R2)
{
    double r = double(R2 + 1);
    switch (k.tail.kind) {
    case TailModel::Kind::none: return 0.0;
    case TailModel::Kind::exponential: return std::min(1.0, k.tail.C * std::exp(-k.tail.rate * r));
    case TailModel::Kind::polynomial: return std::min(1.0, k.tail.C * std::pow(r, -k.tail.rate));
    }
    return 0.0;
}

namespace detail {

/** Visit every z with lo < |z|_inf <= hi. */
inline void for_each_shell_point(int n, int lo, int hi, const std::function<void(const std::vector<int>&)>& f)
{
    std::vector<int> z(std::size_t(n), -hi);
    while (true) {
        int m = 0;
        for (int c : z) m = std::max(m, std::abs(c));
        if (m > lo) f(z);
        int i = n - 1;
        while (i >= 0) {
            if (++z[std::size_t(i)] <= hi) break;
            z[std::size_t(i)] = -hi;
            --i;
        }
        if (i < 0) break;
    }
}

inline constexpr double max_tail_points = 2e7;

struct TailSum {
    double explicit_sum = 0.0;
    double remainder = 0.0;
    int R2 = 0;
};

/**
 * Sum of transform(majorant(z)) over |z|_inf > R restricted by keep(z); explicit
 * out to an adaptive R2, then a closed-form remainder scaled by `kappa(sup)`.
 */
inline TailSum tail_sum(const LatticeKernel& k, const std::function<bool(const std::vector<int>&)>& keep,
                        const std::function<double(double)>& transform, const std::function<double(double)>& kappa,
                        int min_R2 = 0, double scale = 0.0,
                        double max_points = max_tail_points)
{
    TailSum out;
    out.R2 = k.R;
    if (k.tail.kind == TailModel::Kind::none || k.tail.C == 0.0) return out;
    KahanSum<double> s;
    int lo = k.R;
    int hi = std::max(2 * k.R + 2, min_R2);
    while (true) {
        for_each_shell_point(k.n, lo, hi, [&](const std::vector<int>& z) {
            if (keep(z)) s.add(transform(tail_value(k, z)));
        });
        double rem = kappa(tail_sup(k, hi)) * tail_remainder(k, hi);
        out.explicit_sum = s.value();
        out.remainder = rem;
        out.R2 = hi;
        double next_points = std::pow(double(4 * hi + 1), double(k.n));
        if (rem <= std::max(1e-14, 1e-10 * (out.explicit_sum + scale)) || next_points > max_points) break;
        lo = hi;
        hi *= 2;
    }
    return out;
}

inline double arcsin_kappa(double sup) { return sup < 1.0 ? 1.0 / std::sqrt(1.0 - sup * sup) : std::numbers::pi / 2; }

} // namespace detail

struct LatticeBound {
    double value = 0.0;       ///< certified upper bound
    double tail_error = 0.0;  ///< contribution of the closed-form remainder
    int R2 = 0;               ///< explicit enumeration radius of the tail majorant
};

/** Z^n against Z^n bound: sin(min(sum_z arcsin eps(z), pi/2)) with certified tail. */
inline LatticeBound zn_bound(const LatticeKernel& k)
{
    validate(k);
    KahanSum<double> s;
    for (double v : k.values) s.add(std::asin(v));
    auto t = detail::tail_sum(
        k, [](const std::vector<int>&) { return true; }, [](double x) { return std::asin(x); }, detail::arcsin_kappa);
    double base = s.value() + t.explicit_sum;
    LatticeBound out;
    out.value = std::sin(std::min(base + t.remainder, std::numbers::pi / 2));
    out.tail_error = out.value - std::sin(std::min(base, std::numbers::pi / 2));
    out.R2 = t.R2;
    return out;
}

/** min(sum_{|z| >= d} eps(z), 1) with certified tail. */
inline LatticeBound distance_bound(const LatticeKernel& k, double d)
{
    validate(k);
    require(d >= 0.0, ErrorKind::invalid_input, "distance must be >= 0");
    KahanSum<double> s;
    for (std::size_t i = 0; i < k.values.size(); ++i)
        if (lattice_norm(k.point(i), k.norm) >= d) s.add(k.values[i]);
    auto keep = [&](const std::vector<int>& z) { return lattice_norm(z, k.norm) >= d; };
    auto t = detail::tail_sum(
        k, keep, [](double x) { return x; }, [](double) { return 1.0; }, int(std::ceil(d)) + 1);
    double base = s.value() + t.explicit_sum;
    LatticeBound out;
    out.value = std::min(base + t.remainder, 1.0);
    out.tail_error = out.value - std::min(base, 1.0);
    out.R2 = t.R2;
    return out;
}

struct SublatticeResult {
    double k = 0.0;
    int ell = 0;
    std::vector<double> class_sums;  ///< s(c) for c in (Z/ell)^n, first coordinate slowest
};

inline constexpr int max_sublattice_spacing = 64;

/**
 * Uniform bound k < 1 on the correlation between any two disjoint blocks, from a
 * spacing ell for which every congruence class of nonzero offsets has sum < 1:
 * k = sqrt(1 - prod_c (1 - s(c)^2)^(ell^n)).
 */
inline SublatticeResult sublattice_k(const LatticeKernel& k)
{
    validate(k);
    for (std::size_t i = 0; i < k.values.size(); ++i) {
        std::vector<int> z = k.point(i);
        bool zero = std::all_of(z.begin(), z.end(), [](int c) { return c == 0; });
        if (!zero) require(k.values[i] < 1.0, ErrorKind::invalid_input, "eps(z) must be < 1 for z != 0");
    }
    // explicit tail majorant points, shared by every spacing
    std::vector<int> tail_coords;
    std::vector<double> tail_vals;
    double tail_remainder_value = 0.0;
    if (k.tail.kind != TailModel::Kind::none && k.tail.C > 0.0) {
        double window_sum = 0.0;
        for (double v : k.values) window_sum += v;
        auto t = detail::tail_sum(
            k,
            [&](const std::vector<int>& z) {
                tail_coords.insert(tail_coords.end(), z.begin(), z.end());
                tail_vals.push_back(tail_value(k, z));
                return false;
            },
            [](double x) { return x; }, [](double) { return 1.0; }, 0, window_sum, 2e6);
        tail_remainder_value = t.remainder;
    }
    for (int ell = 1; ell <= max_sublattice_spacing; ++ell) {
        std::size_t classes = 1;
        for (int i = 0; i < k.n; ++i) classes *= std::size_t(ell);
        if (double(classes) > 1e6) break;
        std::vector<KahanSum<double>> s(classes);
        auto class_of = [&](const std::vector<int>& z) {
            std::size_t c = 0;
            for (int v : z) c = c * std::size_t(ell) + std::size_t(((v % ell) + ell) % ell);
            return c;
        };
        for (std::size_t i = 0; i < k.values.size(); ++i) {
            std::vector<int> z = k.point(i);
            if (std::all_of(z.begin(), z.end(), [](int c) { return c == 0; })) continue;
            s[class_of(z)].add(k.values[i]);
        }
        double remainder = 0.0;
        if (!tail_coords.empty() || tail_remainder_value > 0.0) {
            for (std::size_t p = 0; p < tail_vals.size(); ++p) {
                std::vector<int> z(tail_coords.begin() + std::ptrdiff_t(p) * k.n,
                                   tail_coords.begin() + std::ptrdiff_t(p + 1) * k.n);
                s[class_of(z)].add(tail_vals[p]);
            }
            remainder = tail_remainder_value;
        }
        std::vector<double> sums(classes);
        bool ok = true;
        for (std::size_t c = 0; c < classes; ++c) {
            sums[c] = s[c].value() + remainder;
            if (!(sums[c] < 1.0)) ok = false;
        }
        if (!ok) continue;
        double logprod = 0.0;
        for (double v : sums) logprod += double(classes) * std::log1p(-v * v);
        SublatticeResult out;
        out.k = std::sqrt(std::max(0.0, -std::expm1(logprod)));
        out.ell = ell;
        out.class_sums = sums;
        return out;
    }
    throw Error(ErrorKind::no_valid_spacing, "no spacing ell <= 64 makes every class sum < 1");
}

// ---------------------------------------------------------------------------
// Perron-Frobenius utilities

struct PFCertificate {
    double rho = 0.0;
    Vector u;                 ///< strictly positive, A u <= (rho + delta) u
    double certified = 0.0;   ///< max_i (A u)_i / u_i
    double lower = 0.0;       ///< Collatz-Wielandt lower bound on rho
    double upper = 0.0;       ///< Collatz-Wielandt upper bound on rho
};

namespace detail {

/** Strongly connected components (Tarjan), returned in discovery order. */
inline std::vector<std::vector<Index>> strong_components(const Matrix& A)
{
    const Index n = A.rows();
    std::vector<Index> index(std::size_t(n), -1), low(std::size_t(n), 0), stack;
    std::vector<bool> on(std::size_t(n), false);
    std::vector<std::vector<Index>> comps;
    Index counter = 0;
    std::function<void(Index)> visit = [&](Index v) {
        index[std::size_t(v)] = low[std::size_t(v)] = counter++;
        stack.push_back(v);
        on[std::size_t(v)] = true;
        for (Index w = 0; w < n; ++w) {
            if (A(v, w) <= 0.0) continue;
            if (index[std::size_t(w)] < 0) {
                visit(w);
                low[std::size_t(v)] = std::min(low[std::size_t(v)], low[std::size_t(w)]);
            } else if (on[std::size_t(w)]) {
                low[std::size_t(v)] = std::min(low[std::size_t(v)], index[std::size_t(w)]);
            }
        }
        if (low[std::size_t(v)] == index[std::size_t(v)]) {
            std::vector<Index> comp;
            Index w;
            do {
                w = stack.back();
                stack.pop_back();
                on[std::size_t(w)] = false;
                comp.push_back(w);
            } while (w != v);
            comps.push_back(comp);
        }
    };
    for (Index v = 0; v < n; ++v)
        if (index[std::size_t(v)] < 0) visit(v);
    return comps;
}

/** Spectral radius of an irreducible nonnegative block with Collatz-Wielandt bracket. */
inline std::pair<double, double> irreducible_radius(const Matrix& B)
{
    const Index n = B.rows();
    if (n == 1) return {B(0, 0), B(0, 0)};
    Matrix P = B + Matrix::Identity(n, n);
    Vector x = Vector::Ones(n);
    double lo = 0.0, hi = 0.0;
    for (int it = 0; it < 200000; ++it) {
        Vector y = P * x;
        Vector r = y.cwiseQuotient(x);
        lo = r.minCoeff();
        hi = r.maxCoeff();
        x = y / y.maxCoeff();
        if (hi - lo <= 1e-14 * hi) break;
    }
    return {lo - 1.0, hi - 1.0};
}

} // namespace detail

/** Spectral radius of A >= 0 and a positive vector certifying A u <= (rho + delta) u. */
inline PFCertificate pf_certificate(const Matrix& A, double delta = 1e-6)
{
    const Index n = A.rows();
    require(A.cols() == n && n >= 1, ErrorKind::invalid_input, "matrix must be square");
    require(delta > 0.0, ErrorKind::invalid_input, "delta must be > 0");
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            require(std::isfinite(A(i, j)) && A(i, j) >= 0.0, ErrorKind::invalid_input, "matrix must be nonnegative");
    PFCertificate out;
    for (const auto& comp : detail::strong_components(A)) {
        Matrix B = submatrix(A, comp, comp);
        auto [lo, hi] = detail::irreducible_radius(B);
        out.lower = std::max(out.lower, lo);
        out.upper = std::max(out.upper, hi);
    }
    out.rho = 0.5 * (out.lower + out.upper);
    double lam = out.rho + delta;
    Matrix M = Matrix::Identity(n, n) - A / lam;
    out.u = M.partialPivLu().solve(Vector::Ones(n));
    require((out.u.array() > 0.0).all(), ErrorKind::undefined, "certificate lost positivity");
    out.certified = (A * out.u).cwiseQuotient(out.u).maxCoeff();
    return out;
}

} // namespace rhomix
