#pragma once

#include "core.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <concepts>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace rhomix {

/** Lambda(eps) = eps (1 + |ln eps|), Lambda(0) = 0. */
inline double lambda_fn(double eps)
{
    require(std::isfinite(eps) && eps >= 0.0 && eps <= 1.0, ErrorKind::invalid_input, "eps must lie in [0,1]");
    if (eps == 0.0) return 0.0;
    return eps * (1.0 + std::abs(std::log(eps)));
}

// ---------------------------------------------------------------------------
// Weak criterion: product of H^1_0 seminorms

struct WeakBound {
    double value = 0.0;
    double zeta_norm = 0.0;
    double theta_norm = 0.0;
    bool zeta_diverges = false;
    bool theta_diverges = false;
};

namespace detail {

/** Squared H^1_0 seminorm of samples on a uniform grid, using every `stride`-th point. */
inline double h10_squared(const std::vector<double>& f, std::size_t stride)
{
    const std::size_t n = (f.size() - 1) / stride;
    const double h = 1.0 / double(n);
    KahanSum<double> s;
    for (std::size_t i = 0; i < n; ++i) {
        double d = f[(i + 1) * stride] - f[i * stride];
        s.add(d * d / h);
    }
    return s.value();
}

struct SeminormEstimate {
    double norm = 0.0;
    bool diverges = false;
};

inline SeminormEstimate h10_seminorm(const std::vector<double>& f, const char* name)
{
    require(f.size() >= 9 && (f.size() - 1) % 4 == 0, ErrorKind::invalid_input,
            std::string(name) + " needs 4k+1 samples on a uniform grid of [0,1]");
    double scale = 0.0;
    for (double v : f) {
        require(std::isfinite(v), ErrorKind::invalid_input, std::string(name) + " samples must be finite");
        scale = std::max(scale, std::abs(v));
    }
    require(std::abs(f.front()) <= 1e-9 * std::max(scale, 1.0) && std::abs(f.back()) <= 1e-9 * std::max(scale, 1.0),
            ErrorKind::boundary, std::string(name) + " must vanish at 0 and 1");
    double n1 = h10_squared(f, 1), n2 = h10_squared(f, 2), n4 = h10_squared(f, 4);
    SeminormEstimate out;
    out.norm = std::sqrt(n1);
    double d1 = n1 - n2, d2 = n2 - n4;
    // a convergent seminorm has geometrically shrinking increments under refinement
    if (std::abs(d2) > 1e-12 * std::max(n1, 1e-300) && d1 / d2 > 0.75) out.diverges = true;
    return out;
}

} // namespace detail

/**
 * ||zeta||_{H^1_0} ||theta||_{H^1_0} from samples on the uniform grid k/n, k = 0..n
 * (n divisible by 4). A seminorm that keeps growing under refinement is reported infinite.
 */
inline WeakBound weak_bound(const std::vector<double>& zeta, const std::vector<double>& theta)
{
    auto z = detail::h10_seminorm(zeta, "zeta");
    auto t = detail::h10_seminorm(theta, "theta");
    WeakBound out;
    out.zeta_diverges = z.diverges;
    out.theta_diverges = t.diverges;
    out.zeta_norm = z.diverges ? std::numeric_limits<double>::infinity() : z.norm;
    out.theta_norm = t.diverges ? std::numeric_limits<double>::infinity() : t.norm;
    if ((!z.diverges && z.norm == 0.0) || (!t.diverges && t.norm == 0.0))
        out.value = 0.0;
    else
        out.value = out.zeta_norm * out.theta_norm;
    return out;
}

template <typename F, typename G>
    requires std::invocable<F&, double> && std::invocable<G&, double>
WeakBound weak_bound(F&& zeta, G&& theta, std::size_t n = std::size_t(1) << 16)
{
    std::vector<double> z(n + 1), t(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        double p = double(i) / double(n);
        z[i] = zeta(p);
        t[i] = theta(p);
    }
    return weak_bound(z, t);
}

// ---------------------------------------------------------------------------
// Chogosov law

/** @brief Bivariate law on (0,1)^2 with CDF (pq + eps sqrt(p p' q q')) ^ p ^ q. */
struct ChogosovModel {
    double eps = 0.5;

    explicit ChogosovModel(double e = 0.5) : eps(e)
    {
        require(std::isfinite(e) && e > 0.0 && e < 1.0, ErrorKind::invalid_input, "eps must lie in (0,1)");
    }

    /** Lower border curve: q p' = eps^2 p q'. */
    double q_D(double p) const
    {
        double e2 = eps * eps;
        return e2 * p / ((1.0 - p) + e2 * p);
    }
    /** Upper border curve: p q' = eps^2 q p'. */
    double q_U(double p) const
    {
        double e2 = eps * eps;
        return p / (p + e2 * (1.0 - p));
    }
    double dq_D(double p) const { return sqr(eps / ((1.0 - p) + eps * eps * p)); }
    double dq_U(double p) const { return sqr(eps / (p + eps * eps * (1.0 - p))); }

    double cdf(double p, double q) const
    {
        p = clamp01(p);
        q = clamp01(q);
        double v = p * q + eps * std::sqrt(p * (1.0 - p) * q * (1.0 - q));
        return std::min({v, p, q});
    }

    /** Density of the absolutely continuous part inside the middle zone. */
    double interior_density(double p, double q) const
    {
        return 1.0 + eps * (p - 0.5) * (q - 0.5) / std::sqrt(p * (1.0 - p) * q * (1.0 - q));
    }

    /** d/dp of the CDF inside the middle zone: conditional CDF of q given p. */
    double conditional_cdf_interior(double p, double q) const
    {
        return q - eps * (p - 0.5) * std::sqrt(q * (1.0 - q) / (p * (1.0 - p)));
    }

    double atom_D(double p) const { return q_D(p) / (2.0 * p); }
    double atom_U(double p) const { return (1.0 - q_U(p)) / (2.0 * (1.0 - p)); }
};

enum class ChogosovZone { one, two, three, D, U };

inline const char* zone_name(ChogosovZone z)
{
    switch (z) {
    case ChogosovZone::one: return "1";
    case ChogosovZone::two: return "2";
    case ChogosovZone::three: return "3";
    case ChogosovZone::D: return "D";
    case ChogosovZone::U: return "U";
    }
    return "?";
}

inline double chogosov_cdf(const ChogosovModel& m, double p, double q) { return m.cdf(p, q); }

/** Zone 1: CDF equals p (above U); zone 3: CDF equals q (below D). */
inline ChogosovZone chogosov_zone(const ChogosovModel& m, double p, double q)
{
    require(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0, ErrorKind::invalid_input, "p and q must lie in (0,1)");
    double r = p * (1.0 - q) / (q * (1.0 - p));
    double e2 = m.eps * m.eps;
    if (std::abs(r - e2) <= 1e-12 * e2) return ChogosovZone::U;
    if (std::abs(r - 1.0 / e2) <= 1e-12 / e2) return ChogosovZone::D;
    if (r < e2) return ChogosovZone::one;
    if (r > 1.0 / e2) return ChogosovZone::three;
    return ChogosovZone::two;
}

enum class ChogosovBranch { D, interior, U };

struct QuantileResult {
    double q = 0.0;
    ChogosovBranch branch = ChogosovBranch::interior;
};

/** Conditional quantile of q given p (monotone rearrangement). */
inline QuantileResult chogosov_quantile_branch(const ChogosovModel& m, double p, double omega)
{
    require(p > 0.0 && p < 1.0, ErrorKind::invalid_input, "p must lie in (0,1)");
    require(omega >= 0.0 && omega <= 1.0, ErrorKind::invalid_input, "omega must lie in [0,1]");
    double lo = m.q_D(p), hi = m.q_U(p);
    if (omega < m.atom_D(p)) return {lo, ChogosovBranch::D};
    if (omega > 1.0 - m.atom_U(p)) return {hi, ChogosovBranch::U};
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        double mid = 0.5 * (lo + hi);
        (m.conditional_cdf_interior(p, mid) < omega ? lo : hi) = mid;
    }
    return {0.5 * (lo + hi), ChogosovBranch::interior};
}

inline double chogosov_quantile(const ChogosovModel& m, double p, double omega)
{
    return chogosov_quantile_branch(m, p, omega).q;
}

struct ChogosovPoint {
    double p = 0.0;
    double q = 0.0;
    ChogosovBranch branch = ChogosovBranch::interior;
};

/** Inverse-transform sample: p and omega uniform, q = Q(p, omega). */
inline std::vector<ChogosovPoint> chogosov_sample(const ChogosovModel& m, std::size_t n, std::uint64_t seed)
{
    require(n >= 1, ErrorKind::invalid_input, "sample size must be >= 1");
    std::mt19937_64 rng(seed);
    std::vector<ChogosovPoint> out(n);
    for (auto& pt : out) {
        double p, w;
        do {
            p = double(rng() >> 11) * 0x1.0p-53;
        } while (p <= 0.0);
        w = double(rng() >> 11) * 0x1.0p-53;
        auto r = chogosov_quantile_branch(m, p, w);
        pt = {p, r.q, r.branch};
    }
    return out;
}

/** Kolmogorov-Smirnov distance of samples to the uniform law on (0,1). */
inline double ks_uniform(std::vector<double> x)
{
    std::sort(x.begin(), x.end());
    const double n = double(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        d = std::max({d, double(i + 1) / n - x[i], x[i] - double(i) / n});
    return d;
}

struct IntegralIdentity {
    double atom_D = 0.0;
    double atom_U = 0.0;
    double interior = 0.0;
    double total = 0.0;
};

/**
 * lambda(p) = int_0^1 (p p' / Q Q')^{3/2} dQ/dp d omega split into the two atoms
 * (closed form) and the middle branch (adaptive Gauss-Kronrod in omega).
 */
inline IntegralIdentity lambda_integral_identity(const ChogosovModel& m, double p)
{
    require(p > 0.0 && p < 1.0, ErrorKind::invalid_input, "p must lie in (0,1)");
    const double pp = p * (1.0 - p);
    IntegralIdentity out;
    double qd = m.q_D(p), qu = m.q_U(p);
    out.atom_D = m.atom_D(p) * std::pow(pp / (qd * (1.0 - qd)), 1.5) * m.dq_D(p);
    out.atom_U = m.atom_U(p) * std::pow(pp / (qu * (1.0 - qu)), 1.5) * m.dq_U(p);
    double w0 = m.atom_D(p), w1 = 1.0 - m.atom_U(p);
    auto integrand = [&](double w) {
        double q = chogosov_quantile_branch(m, p, std::clamp(w, w0, w1)).q;
        double qq = q * (1.0 - q);
        // implicit derivative of the quantile with respect to p at fixed omega
        double dQ = m.eps * std::sqrt(qq) / (4.0 * std::pow(pp, 1.5) * m.interior_density(p, q));
        return std::pow(pp / qq, 1.5) * dQ;
    };
    double err = 0.0;
    out.interior =
        boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, w0, w1, 20, 1e-14, &err);
    out.total = out.atom_D + out.atom_U + out.interior;
    return out;
}

// ---------------------------------------------------------------------------
// Scale-invariant limit operator near the corner

/** (L* f)(p) for f(q) = q^s, by closed-form integration. */
inline double lstar_power(double eps, double s, double p)
{
    require(p > 0.0, ErrorKind::invalid_input, "p must be > 0");
    double lo = eps * eps * p, hi = p / (eps * eps);
    double a = s + 0.5;
    double integral = std::abs(a) < 1e-15 ? std::log(hi / lo) : (std::pow(hi, a) - std::pow(lo, a)) / a;
    return eps / (4.0 * std::sqrt(p)) * integral + 0.5 * eps * eps * std::pow(lo, s) + 0.5 * std::pow(hi, s);
}

/** (L* f)(p) for a general f by adaptive quadrature in log q. */
template <typename F>
double lstar_quadrature(double eps, F&& f, double p)
{
    double lo = eps * eps * p, hi = p / (eps * eps);
    auto g = [&](double u) {
        double q = std::exp(u);
        return eps / (4.0 * std::sqrt(p * q)) * f(q) * q;
    };
    double err = 0.0;
    double integral =
        boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, std::log(lo), std::log(hi), 20, 1e-14, &err);
    return integral + 0.5 * eps * eps * f(lo) + 0.5 * f(hi);
}

/** Max relative residual of L* p^{-1/2} = Lambda(eps) p^{-1/2} over the given points. */
inline double lstar_identity(const ChogosovModel& m, const std::vector<double>& points)
{
    double lam = lambda_fn(m.eps), worst = 0.0;
    for (double p : points) {
        double f = 1.0 / std::sqrt(p);
        worst = std::max(worst, std::abs(lstar_power(m.eps, -0.5, p) - lam * f) / f);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Discretised transfer operator

struct OpnormReport {
    double rho_hat = 0.0;   ///< spectral radius on mean-zero grid functions
    double rayleigh = 0.0;  ///< Rayleigh quotient of the truncated quasi-eigenvector
    double lambda = 0.0;    ///< Lambda(eps)
    int m = 0;
    int krylov_steps = 0;
};

namespace detail {

/** Banded storage of a symmetric grid operator: row a covers columns [lo[a], hi[a]). */
struct BandOperator {
    int m = 0;
    std::vector<int> lo, hi;
    std::vector<std::size_t> offset;
    std::vector<double> values;

    Vector apply(const Vector& x) const
    {
        Vector y(m);
        for (int a = 0; a < m; ++a) {
            const double* v = values.data() + offset[std::size_t(a)];
            double s = 0.0;
            for (int b = lo[std::size_t(a)]; b < hi[std::size_t(a)]; ++b) s += v[b - lo[std::size_t(a)]] * x(b);
            y(a) = s;
        }
        return y;
    }
};

inline BandOperator chogosov_transfer(const ChogosovModel& model, int m)
{
    BandOperator T;
    T.m = m;
    const double h = 1.0 / double(m);
    std::vector<double> prev(std::size_t(m) + 1), cur(std::size_t(m) + 1);
    for (int b = 0; b <= m; ++b) prev[std::size_t(b)] = 0.0;
    for (int a = 0; a < m; ++a) {
        double p1 = double(a + 1) * h;
        for (int b = 0; b <= m; ++b) cur[std::size_t(b)] = model.cdf(p1, double(b) * h);
        double p0 = double(a) * h;
        int lo = std::max(0, int(std::floor(model.q_D(std::max(p0, 0.0)) * m)) - 1);
        int hi = std::min(m, int(std::ceil(model.q_U(std::min(p1, 1.0)) * m)) + 1);
        T.lo.push_back(lo);
        T.hi.push_back(hi);
        T.offset.push_back(T.values.size());
        for (int b = lo; b < hi; ++b) {
            double mass = cur[std::size_t(b) + 1] - cur[std::size_t(b)] - prev[std::size_t(b) + 1] + prev[std::size_t(b)];
            T.values.push_back(double(m) * std::max(mass, 0.0));
        }
        std::swap(prev, cur);
    }
    return T;
}

inline void center(Vector& v) { v.array() -= v.mean(); }

} // namespace detail

/**
 * Spectral radius of the conditional-expectation operator discretised on an m-cell grid
 * (exact cell masses from the CDF), restricted to mean-zero functions. Uses Lanczos with
 * full reorthogonalisation on the symmetric operator.
 */
inline OpnormReport chogosov_opnorm(const ChogosovModel& model, int m)
{
    require(m >= 256, ErrorKind::grid_too_coarse, "grid needs m >= 256 cells");
    auto T = detail::chogosov_transfer(model, m);
    OpnormReport out;
    out.m = m;
    out.lambda = lambda_fn(model.eps);

    const double eta = 4.0 / double(m);
    Vector f(m);
    for (int a = 0; a < m; ++a) {
        double p = std::clamp((double(a) + 0.5) / double(m), eta, 1.0 - eta);
        f(a) = 2.0 * (2.0 * p - 1.0) / std::sqrt(p * (1.0 - p));
    }
    detail::center(f);
    out.rayleigh = f.dot(T.apply(f)) / f.squaredNorm();

    const int max_steps = std::min(m - 1, 400);
    std::vector<Vector> Q;
    std::vector<double> alpha, beta;
    Vector q = f / f.norm();
    double prev = 0.0;
    int stable = 0;
    for (int k = 0; k < max_steps; ++k) {
        Q.push_back(q);
        Vector w = T.apply(q);
        detail::center(w);
        double a = q.dot(w);
        alpha.push_back(a);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& v : Q) w -= v.dot(w) * v;
        double b = w.norm();
        Eigen::MatrixXd Tk = Eigen::MatrixXd::Zero(k + 1, k + 1);
        for (int i = 0; i <= k; ++i) {
            Tk(i, i) = alpha[std::size_t(i)];
            if (i < k) Tk(i, i + 1) = Tk(i + 1, i) = beta[std::size_t(i)];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Tk, Eigen::EigenvaluesOnly);
        double top = es.eigenvalues().cwiseAbs().maxCoeff();
        out.krylov_steps = k + 1;
        out.rho_hat = top;
        if (std::abs(top - prev) <= 1e-14 * top) {
            if (++stable >= 5) break;
        } else {
            stable = 0;
        }
        prev = top;
        if (b <= 1e-14) break;
        beta.push_back(b);
        q = w / b;
    }
    return out;
}

/** Event ratio sup of the Chogosov law over anchored-interval events on an m-grid. */
inline double chogosov_anchored_event_ratio(const ChogosovModel& model, int m)
{
    double worst = 0.0;
    for (int a = 1; a < m; ++a)
        for (int b = 1; b < m; ++b) {
            double p = double(a) / m, q = double(b) / m;
            double cov = model.cdf(p, q) - p * q;
            worst = std::max(worst, std::abs(cov) / std::sqrt(p * (1 - p) * q * (1 - q)));
        }
    return worst;
}

// ---------------------------------------------------------------------------
// Corner-limit measure and its truncation

/** mu*((0,a] x (0,b]) = min(eps sqrt(ab), a, b). */
inline double mustar_cdf(double eps, double a, double b)
{
    return std::min({eps * std::sqrt(a * b), a, b});
}

/** mu*-mass of a rectangle [a0,a1] x [b0,b1]. */
inline double mustar_rect(double eps, double a0, double a1, double b0, double b1)
{
    return mustar_cdf(eps, a1, b1) - mustar_cdf(eps, a0, b1) - mustar_cdf(eps, a1, b0) + mustar_cdf(eps, a0, b0);
}

/**
 * @brief Law on (0,1)^2 with uniform marginals equal to mu* on (0,x]^2 and spread
 * as uniformly as possible elsewhere.
 */
struct NuModel {
    double eps = 0.5;
    double x = 0.02;
    int m = 512;

    NuModel(double e, double xx, int mm = 512) : eps(e), x(xx), m(mm)
    {
        require(e > 0.0 && e < 1.0, ErrorKind::invalid_input, "eps must lie in (0,1)");
        require(xx > 0.0 && xx < 1.0, ErrorKind::invalid_input, "x must lie in (0,1)");
        require(mm >= 8, ErrorKind::grid_too_coarse, "grid needs m >= 8");
    }

    double factor() const { return eps / (1.0 - x) + (eps * x - x * x) / (eps * sqr(1.0 - x)); }

    double cdf(double a, double b) const
    {
        a = clamp01(a);
        b = clamp01(b);
        if (a <= x && b <= x) return mustar_cdf(eps, a, b);
        if (a <= x) {
            double z = mustar_cdf(eps, a, x);
            return z + (a - z) * (b - x) / (1.0 - x);
        }
        if (b <= x) {
            double z = mustar_cdf(eps, x, b);
            return z + (b - z) * (a - x) / (1.0 - x);
        }
        double c = (1.0 - (2.0 - eps) * x) / sqr(1.0 - x);
        double z = eps * x, r = (1.0 - eps) * x;
        return z + r * (b - x) / (1.0 - x) + r * (a - x) / (1.0 - x) + c * (a - x) * (b - x);
    }

    double rect(double a0, double a1, double b0, double b1) const
    {
        return cdf(a1, b1) - cdf(a0, b1) - cdf(a1, b0) + cdf(a0, b0);
    }
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

using IntervalUnion = std::vector<Interval>;

inline double measure(const IntervalUnion& A)
{
    double s = 0.0;
    for (const auto& i : A) s += i.hi - i.lo;
    return s;
}

template <typename Rect>
double union_mass(const Rect& rect, const IntervalUnion& A, const IntervalUnion& B)
{
    double s = 0.0;
    for (const auto& i : A)
        for (const auto& j : B) s += rect(i.lo, i.hi, j.lo, j.hi);
    return s;
}

struct NuEventReport {
    double worst_ratio = 0.0;
    double factor = 0.0;
    IntervalUnion event_a;
    IntervalUnion event_b;
    double correlation_witness = 0.0;  ///< lower bound on the maximal correlation under nu
};

namespace detail {

/**
 * Best union of at most `runs` grid intervals maximising sum(w over cells) / sqrt(k (m - k))
 * over cardinality k; exact dynamic programme over (cell, count, runs, inside).
 */
inline std::pair<double, std::vector<bool>> best_union(const std::vector<double>& w, int runs, double other_var)
{
    const int m = int(w.size());
    const double NEG = -std::numeric_limits<double>::infinity();
    // dp[r][in][k] over processed prefix; choice tracked for reconstruction
    std::vector<std::vector<double>> dp(std::size_t(2 * (runs + 1)), std::vector<double>(std::size_t(m + 1), NEG));
    auto idx = [&](int r, int in) { return std::size_t(2 * r + in); };
    dp[idx(0, 0)][0] = 0.0;
    std::vector<std::vector<unsigned char>> choice(std::size_t(m),
                                                   std::vector<unsigned char>(std::size_t(2 * (runs + 1)) * std::size_t(m + 1), 255));
    for (int c = 0; c < m; ++c) {
        std::vector<std::vector<double>> nd(dp.size(), std::vector<double>(std::size_t(m + 1), NEG));
        for (int r = 0; r <= runs; ++r)
            for (int in = 0; in < 2; ++in)
                for (int k = 0; k <= c; ++k) {
                    double v = dp[idx(r, in)][std::size_t(k)];
                    if (v == NEG) continue;
                    // skip cell
                    if (v > nd[idx(r, 0)][std::size_t(k)]) {
                        nd[idx(r, 0)][std::size_t(k)] = v;
                        choice[std::size_t(c)][idx(r, 0) * std::size_t(m + 1) + std::size_t(k)] = (unsigned char)(idx(r, in) * 2);
                    }
                    // take cell
                    int nr = in ? r : r + 1;
                    if (nr > runs) continue;
                    double nv = v + w[std::size_t(c)];
                    if (nv > nd[idx(nr, 1)][std::size_t(k + 1)]) {
                        nd[idx(nr, 1)][std::size_t(k + 1)] = nv;
                        choice[std::size_t(c)][idx(nr, 1) * std::size_t(m + 1) + std::size_t(k + 1)] =
                            (unsigned char)(idx(r, in) * 2 + 1);
                    }
                }
        dp.swap(nd);
    }
    double best = NEG;
    std::size_t bstate = 0;
    int bk = 0;
    for (std::size_t s = 0; s < dp.size(); ++s)
        for (int k = 1; k < m; ++k) {
            double v = dp[s][std::size_t(k)];
            if (v == NEG) continue;
            double frac = double(k) / m;
            double ratio = v / std::sqrt(frac * (1.0 - frac) * other_var);
            if (ratio > best) {
                best = ratio;
                bstate = s;
                bk = k;
            }
        }
    std::vector<bool> sel(std::size_t(m), false);
    if (best == NEG) return {0.0, sel};
    std::size_t state = bstate;
    int k = bk;
    for (int c = m - 1; c >= 0; --c) {
        unsigned char ch = choice[std::size_t(c)][state * std::size_t(m + 1) + std::size_t(k)];
        bool took = ch & 1u;
        sel[std::size_t(c)] = took;
        state = ch >> 1;
        if (took) --k;
    }
    return {best, sel};
}

inline IntervalUnion cells_to_union(const std::vector<bool>& sel)
{
    IntervalUnion out;
    const int m = int(sel.size());
    for (int c = 0; c < m; ++c) {
        if (!sel[std::size_t(c)]) continue;
        if (c > 0 && sel[std::size_t(c - 1)])
            out.back().hi = double(c + 1) / m;
        else
            out.push_back({double(c) / m, double(c + 1) / m});
    }
    return out;
}

} // namespace detail

/**
 * Worst normalised event covariance of nu over unions of at most `runs` grid intervals
 * per side: exhaustive over anchored intervals, then alternating exact per-side
 * optimisation from the best anchored pairs.
 */
inline NuEventReport nu_event_ratio(const NuModel& nu, int runs = 4, int restarts = 8)
{
    require(nu.factor() < 1.0, ErrorKind::factor_too_large, "x too large: the event factor is >= 1");
    const int m = nu.m;
    NuEventReport out;
    out.factor = nu.factor();
    auto rect = [&](double a0, double a1, double b0, double b1) { return nu.rect(a0, a1, b0, b1); };
    auto ratio = [&](const IntervalUnion& A, const IntervalUnion& B) {
        double a = measure(A), b = measure(B);
        double den = std::sqrt(a * (1 - a) * b * (1 - b));
        return den > 0 ? (union_mass(rect, A, B) - a * b) / den : 0.0;
    };

    struct Cand {
        double r;
        IntervalUnion A, B;
    };
    std::vector<Cand> cands;
    for (int i = 1; i < m; ++i)
        for (int j = 1; j < m; ++j) {
            for (int sa = 0; sa < 2; ++sa)
                for (int sb = 0; sb < 2; ++sb) {
                    IntervalUnion A{sa ? Interval{double(i) / m, 1.0} : Interval{0.0, double(i) / m}};
                    IntervalUnion B{sb ? Interval{double(j) / m, 1.0} : Interval{0.0, double(j) / m}};
                    double r = ratio(A, B);
                    if (cands.size() < std::size_t(restarts) || r > cands.back().r) {
                        cands.push_back({r, A, B});
                        std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) { return x.r > y.r; });
                        if (cands.size() > std::size_t(restarts)) cands.pop_back();
                    }
                }
        }
    out.worst_ratio = cands.front().r;
    out.event_a = cands.front().A;
    out.event_b = cands.front().B;

    for (auto c : cands) {
        double cur = c.r;
        for (int round = 0; round < 6; ++round) {
            // optimise A given B
            double b = measure(c.B);
            std::vector<double> w(static_cast<std::size_t>(m));
            for (int a = 0; a < m; ++a) {
                IntervalUnion cell{{double(a) / m, double(a + 1) / m}};
                w[std::size_t(a)] = union_mass(rect, cell, c.B) - b / m;
            }
            auto [ra, sa] = detail::best_union(w, runs, b * (1 - b));
            IntervalUnion A = detail::cells_to_union(sa);
            // optimise B given A
            double a = measure(A);
            for (int j = 0; j < m; ++j) {
                IntervalUnion cell{{double(j) / m, double(j + 1) / m}};
                w[std::size_t(j)] = union_mass(rect, A, cell) - a / m;
            }
            auto [rb, sb] = detail::best_union(w, runs, a * (1 - a));
            IntervalUnion B = detail::cells_to_union(sb);
            double r = ratio(A, B);
            if (r <= cur * (1 + 1e-12)) {
                if (r > cur) cur = r;
                break;
            }
            cur = r;
            c.A = A;
            c.B = B;
        }
        if (cur > out.worst_ratio) {
            out.worst_ratio = cur;
            out.event_a = c.A;
            out.event_b = c.B;
        }
    }

    // scaled truncated quasi-eigenvector f = p^{-1/2} on [a, 1], moved into (0, x]
    double best = 0.0;
    const double e = nu.eps, w = 2.0 * std::abs(std::log(e));
    for (double L = w + 1.0; L <= 700.0; L *= 1.05) {
        double rq = (e / 4.0 * (2.0 * L * w - w * w) + e * (L - w)) / L;
        double mean = 2.0 * (1.0 - std::exp(-L / 2.0)) / std::sqrt(L);
        best = std::max(best, rq - mean * mean * nu.x);
    }
    out.correlation_witness = best;
    return out;
}

/** <L* f, f> / ||f||^2 for f = p^{-1/2} on [exp(-L), 1], closed form. */
inline double truncated_quasi_rayleigh(double eps, double L)
{
    const double w = 2.0 * std::abs(std::log(eps));
    require(L >= w, ErrorKind::invalid_input, "truncation length must exceed 2|ln eps|");
    return (eps / 4.0 * (2.0 * L * w - w * w) + eps * (L - w)) / L;
}

} // namespace rhomix
