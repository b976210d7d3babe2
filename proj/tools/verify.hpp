#pragma once

#include <rhomix/rhomix.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace rhomix::verify {

/** @brief Outcome of one acceptance criterion. */
struct Result {
    int id = 0;
    std::string title;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

namespace detail {

/** Collects named checks; the criterion passes when every check does. */
class Checks {
public:
    void expect(bool ok, const std::string& what)
    {
        if (!ok) {
            ok_ = false;
            if (!failures_.empty()) failures_ += "; ";
            failures_ += what;
        }
    }
    void note(const std::string& s)
    {
        if (!notes_.empty()) notes_ += "; ";
        notes_ += s;
    }
    bool ok() const { return ok_; }
    std::string summary() const
    {
        if (ok_) return notes_;
        return "failed: " + failures_ + (notes_.empty() ? "" : " | " + notes_);
    }

private:
    bool ok_ = true;
    std::string failures_, notes_;
};

inline std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline bool matrix_near(const Matrix& A, const Matrix& B, double tol)
{
    return A.rows() == B.rows() && A.cols() == B.cols() && (A - B).cwiseAbs().maxCoeff() <= tol;
}

inline Matrix mat2(double a, double b, double c, double d)
{
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

inline Matrix mat3(std::initializer_list<double> v)
{
    Matrix m(3, 3);
    auto it = v.begin();
    for (Index r = 0; r < 3; ++r)
        for (Index c = 0; c < 3; ++c) m(r, c) = *it++;
    return m;
}

/** 3x3 joint with a C^1 singularity of the maximal correlation at alpha = 0. */
inline Matrix kinked_joint(double alpha)
{
    const double a = 2.0 / 9.0, b = 1.0 / 18.0;
    Matrix m(3, 3);
    m << a, b, b, b, a + alpha, b - alpha, b, b - alpha, a + alpha;
    return m;
}

/** Uniform law on pairs (x, y) with y a member of the p-subset x of {1..n}, streamed by X row. */
inline double subset_membership_maxcorr(int n, int p)
{
    require(p > 0 && p < n && n <= 62, ErrorKind::invalid_input, "need 0 < p < n <= 62");
    double rows = std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(p + 1.0) - std::lgamma(n - p + 1.0)));
    const double w = 1.0 / (rows * p);
    RowStreamMaxcorr acc(n);
    std::vector<std::pair<Index, double>> row(static_cast<std::size_t>(p));
    std::uint64_t x = (std::uint64_t(1) << p) - 1, end = std::uint64_t(1) << n;
    while (x < end) {
        std::size_t k = 0;
        for (std::uint64_t y = x; y; y &= y - 1) row[k++] = {Index(__builtin_ctzll(y)), w};
        acc.add_row(row);
        // next subset of the same cardinality
        std::uint64_t c = x & (~x + 1), r = x + c;
        x = (((r ^ x) >> 2) / c) | r;
    }
    return acc.maxcorr();
}

/** Ising-type triangle of +-1 spins with coupling J, Pr ~ exp(J sum s_i s_j). */
inline FiniteSystem spin_cluster(int spins, double J)
{
    std::vector<Variable> vars;
    for (int i = 0; i < spins; ++i) vars.push_back({"S" + std::to_string(i + 1), 2});
    return FiniteSystem::from_weights(vars, [&](const std::vector<int>& d) {
        double e = 0.0;
        for (int i = 0; i < spins; ++i)
            for (int j = i + 1; j < spins; ++j) e += spin_of(d[std::size_t(i)]) * spin_of(d[std::size_t(j)]);
        return std::exp(J * e);
    });
}

/** Random alphabets in {2, 3} for a block, redrawn until the block has at most `cap` states. */
inline std::vector<int> block_alphabets(std::mt19937_64& rng, int count, int cap)
{
    std::uniform_int_distribution<int> size(2, 3);
    for (;;) {
        std::vector<int> a(static_cast<std::size_t>(count));
        int prod = 1;
        for (int& v : a) {
            v = size(rng);
            prod *= v;
        }
        if (prod <= cap) return a;
    }
}

/** @brief One system of the tensorisation sweep with its measured quantities. */
struct SweepItem {
    int N = 0, M = 0;
    double rho = 0.0;
    double simple = 1.0;   ///< 1 when not applicable
    bool simple_applies = false;
    double nm = 1.0;
    double zz = 1.0;
    double event_ratio = 0.0;
};

inline constexpr int sweep_block_cap = 12;

inline SweepItem sweep_item(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> count(1, 3);
    std::uniform_real_distribution<double> strength(0.2, 2.0);
    SweepItem it;
    it.N = count(rng);
    it.M = count(rng);
    auto ax = block_alphabets(rng, it.N, sweep_block_cap);
    auto ay = block_alphabets(rng, it.M, sweep_block_cap);
    std::vector<Variable> vars;
    for (int i = 0; i < it.N; ++i) vars.push_back({"X" + std::to_string(i + 1), ax[std::size_t(i)]});
    for (int j = 0; j < it.M; ++j) vars.push_back({"Y" + std::to_string(j + 1), ay[std::size_t(j)]});
    const double s = strength(rng);
    std::normal_distribution<double> g(0.0, 1.0);
    FiniteSystem sys = FiniteSystem::from_weights(vars, [&](const std::vector<int>&) { return std::exp(s * g(rng)); });

    std::vector<int> X, Y;
    for (int i = 0; i < it.N; ++i) X.push_back(i);
    for (int j = 0; j < it.M; ++j) Y.push_back(it.N + j);
    it.rho = maxcorr_blocks(sys, X, Y);

    Matrix eps(it.N, it.M);
    for (int i = 0; i < it.N; ++i)
        for (int j = 0; j < it.M; ++j) {
            int xi = X[std::size_t(i)], yj = Y[std::size_t(j)];
            eps(i, j) = subjective_maxcorr(sys, xi, yj, complement_pool(sys, {xi, yj}));
        }
    if (it.M == 1 || it.N == 1) {
        it.simple_applies = true;
        std::vector<double> e(eps.data(), eps.data() + eps.size());
        it.simple = simple_bound(e);
    }
    it.nm = nm_bound(eps);
    // offset profile: eps(z) = max over pairs with j - i = z
    std::vector<double> prof(std::size_t(it.N + it.M - 1), 0.0);
    for (int i = 0; i < it.N; ++i)
        for (int j = 0; j < it.M; ++j) {
            auto& e = prof[std::size_t(j - i + it.N - 1)];
            e = std::max(e, eps(i, j));
        }
    it.zz = zz_bound(prof);
    it.event_ratio = event_extremes(make_pair(pair_table(sys, X, Y))).max_ratio;
    return it;
}

inline const std::vector<SweepItem>& sweep(std::uint64_t seed)
{
    static std::vector<SweepItem> cache;
    static std::uint64_t cached_seed = ~std::uint64_t(0);
    if (cache.empty() || cached_seed != seed) {
        cache.clear();
        for (std::uint64_t r = 0; r < 500; ++r) cache.push_back(sweep_item(derive_seed(seed, r)));
        cached_seed = seed;
    }
    return cache;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

// ---------------------------------------------------------------------------

inline Result criterion_worked_example()
{
    detail::Checks c;
    auto t0 = std::chrono::steady_clock::now();
    auto g = gaussian_from_loadings(detail::mat3({4, 1, 1, 1, 4, 1, 1, 1, 4}));
    const double tol = 1e-10;
    double x1y = maxcorr_gaussian(g, {0}, {2}), x2y = maxcorr_gaussian(g, {1}, {2});
    double x1y_x2 = conditional_maxcorr(g, {0}, {2}, {1});
    double xy = maxcorr_gaussian(g, {0, 1}, {2});
    Matrix row(1, 2);
    row << x1y, x2y;
    double simple = nm_bound(row);
    c.expect(detail::near(x1y, 0.5, tol), "{X1:Y} = " + detail::fmt(x1y));
    c.expect(detail::near(x2y, 0.5, tol), "{X2:Y} = " + detail::fmt(x2y));
    c.expect(detail::near(x1y_x2, 1.0 / 3.0, tol), "{X1:Y}_X2 = " + detail::fmt(x1y_x2));
    c.expect(detail::near(xy, 1.0 / std::sqrt(3.0), tol), "{X:Y} = " + detail::fmt(xy));
    c.expect(detail::near(simple, 1.0 / std::sqrt(2.0), tol), "row bound = " + detail::fmt(simple));

    struct Case {
        Matrix loadings, table;
    };
    std::vector<Case> cases = {
        {detail::mat3({4, 1, 1, 1, 4, 1, 1, 1, 4}), detail::mat2(40.5, 13.5, 24, 12)},
        {detail::mat3({1, 0, 0, -1, 1, 0, 1, 1, 1}), detail::mat2(0, 1, 1.0 / 6.0, 0.5)},
        {detail::mat3({1, 0, 1, 0, 1, -1, 0, 0, 1}), detail::mat2(0.5, 1.5, 1, 1)},
    };
    for (std::size_t k = 0; k < cases.size(); ++k) {
        Matrix V = variance_table(gaussian_from_loadings(cases[k].loadings), {0, 1}, {2});
        c.expect(detail::matrix_near(V, cases[k].table, tol), "variance table " + std::to_string(k + 1));
    }
    double secs = detail::seconds_since(t0);
    c.expect(secs < 1.0, "runtime " + detail::fmt(secs) + " s");
    return {1, "worked Gaussian example", c.ok(), c.summary(), secs};
}

inline Result criterion_closed_forms()
{
    detail::Checks c;
    auto t0 = std::chrono::steady_clock::now();
    for (auto [n, p] : {std::pair{5, 2}, std::pair{10, 3}, std::pair{50, 7}}) {
        double rho = detail::subset_membership_maxcorr(n, p);
        double want = std::sqrt(double(n - p) / (double(p) * (n - 1)));
        c.expect(detail::near(rho, want, 1e-12),
                 "subsets (" + std::to_string(n) + "," + std::to_string(p) + ") err " + detail::fmt(rho - want));
    }
    // small cases through the dense table as a second route
    for (auto [n, p] : {std::pair{5, 2}, std::pair{10, 3}}) {
        std::vector<std::uint64_t> rows;
        for (std::uint64_t x = 0; x < (std::uint64_t(1) << n); ++x)
            if (__builtin_popcountll(x) == p) rows.push_back(x);
        Matrix J = Matrix::Zero(Index(rows.size()), n);
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (int y = 0; y < n; ++y)
                if (rows[r] >> y & 1u) J(Index(r), y) = 1.0;
        double rho = maxcorr(J / J.sum());
        double want = std::sqrt(double(n - p) / (double(p) * (n - 1)));
        c.expect(detail::near(rho, want, 1e-12), "dense subsets (" + std::to_string(n) + "," + std::to_string(p) + ")");
    }
    for (double a : {-0.1, 0.0, 1.0 / 18.0}) {
        double rho = maxcorr(detail::kinked_joint(a));
        double want = 0.5 + 6.0 * std::max(a, 0.0);
        c.expect(detail::near(rho, want, 1e-12), "3x3 alpha=" + detail::fmt(a) + " err " + detail::fmt(rho - want));
    }
    return {2, "closed-form maximal correlations", c.ok(), c.summary(), detail::seconds_since(t0)};
}

inline Result criterion_tensor_sweep(std::uint64_t seed)
{
    detail::Checks c;
    auto t0 = std::chrono::steady_clock::now();
    const auto& items = detail::sweep(seed);
    double worst_simple = 1.0, worst_nm = 1.0, worst_zz = 1.0;
    int bad = 0;
    for (const auto& it : items) {
        double ss = it.simple - it.rho, sn = it.nm - it.rho, sz = it.zz - it.rho;
        if (it.simple_applies) worst_simple = std::min(worst_simple, ss);
        worst_nm = std::min(worst_nm, sn);
        worst_zz = std::min(worst_zz, sz);
        if ((it.simple_applies && ss < -1e-9) || sn < -1e-9 || sz < -1e-9) ++bad;
    }
    double secs = detail::seconds_since(t0);
    c.expect(bad == 0, std::to_string(bad) + " systems violate a bound");
    c.expect(secs < 300.0, "runtime " + detail::fmt(secs) + " s");
    c.note("min slack simple " + detail::fmt(worst_simple) + ", NxM " + detail::fmt(worst_nm) + ", ZZ " +
           detail::fmt(worst_zz) + " over " + std::to_string(items.size()) + " systems");
    return {3, "tensorisation soundness sweep", c.ok(), c.summary(), secs};
}

inline Result criterion_independent_pairs(std::uint64_t seed)
{
    detail::Checks c;
    auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (std::uint64_t r = 0; r < 100; ++r) {
        std::mt19937_64 rng(derive_seed(seed ^ 0x4444, r));
        int pairs = std::uniform_int_distribution<int>(1, 3)(rng);
        auto pp = random_pair_product_system(rng, pairs, 3);
        std::vector<int> X, Y;
        double want = 0.0;
        for (int i = 0; i < pairs; ++i) {
            X.push_back(i);
            Y.push_back(pairs + i);
            want = std::max(want, maxcorr(pp.pair_joints[std::size_t(i)]));
        }
        worst = std::max(worst, std::abs(maxcorr_blocks(pp.system, X, Y) - want));
    }
    c.expect(worst <= 1e-9, "max deviation " + detail::fmt(worst));
    c.note("max |rho - max_i rho_i| = " + detail::fmt(worst));
    return {4, "independent tensorisation equality", c.ok(), c.summary(), detail::seconds_since(t0)};
}

inline Result criterion_gaussian_optimality(std::uint64_t seed)
{
    detail::Checks c;
    auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0, worst_e = 0.0;
    for (std::uint64_t r = 0; r < 50; ++r) {
        std::mt19937_64 rng(derive_seed(seed ^ 0x5555, r));
        int n = std::uniform_int_distribution<int>(1, 6)(rng);
        std::vector<double> eps(static_cast<std::size_t>(n));
        for (double& e : eps) e = 0.95 * uniform01(rng);
        auto os = build_optimal_simple(eps);
        std::vector<Index> X(static_cast<std::size_t>(n));
        std::iota(X.begin(), X.end(), Index(0));
        double rho = maxcorr_gaussian(os.system, X, {Index(n)});
        worst = std::max(worst, std::abs(rho - simple_bound(eps)));
        auto ch = chained_maxcorr(os.system, X, Index(n));
        for (int i = 0; i < n; ++i) worst_e = std::max(worst_e, std::abs(ch.e[std::size_t(i)] - eps[std::size_t(i)]));
    }
    c.expect(worst <= 1e-9, "simple bound not attained, dev " + detail::fmt(worst));
    c.expect(worst_e <= 1e-9, "conditional correlations differ from targets, dev " + detail::fmt(worst_e));
    const int k = 64;
    auto bz = build_banded_zz(1.0, k);
    c.expect(std::abs(bz.maxcorr - 2.0 / 3.0) <= 2.0 / k, "banded maxcorr " + detail::fmt(bz.maxcorr));
    c.note("simple dev " + detail::fmt(worst) + ", banded k=64 maxcorr " + detail::fmt(bz.maxcorr));
    return {5, "Gaussian optimality constructions", c.ok(), c.summary(), detail::seconds_since(t0)};
}

inline Result criterion_chogosov(std::uint64_t seed)
{
    detail::Checks c;
    auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = 100000;
    const double ks_crit = 1.6276 / std::sqrt(double(n));
    double worst_ks = 0.0, worst_id = 0.0, worst_l = 0.0;
    for (double e : {0.2, 0.5, 0.8}) {
        ChogosovModel m(e);
        auto pts = chogosov_sample(m, n, derive_seed(seed, std::uint64_t(e * 1000)));
        std::vector<double> ps, qs;
        for (const auto& pt : pts) {
            ps.push_back(pt.p);
            qs.push_back(pt.q);
        }
        double kp = ks_uniform(ps), kq = ks_uniform(qs);
        worst_ks = std::max({worst_ks, kp, kq});
        c.expect(kp < ks_crit && kq < ks_crit, "KS eps=" + detail::fmt(e) + ": " + detail::fmt(kp) + ", " + detail::fmt(kq));
        for (double p : {0.1, 0.5, 0.9}) {
            double d = std::abs(lambda_integral_identity(m, p).total - lambda_fn(e));
            worst_id = std::max(worst_id, d);
        }
        worst_l = std::max(worst_l, lstar_identity(m, {0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95}));
    }
    c.expect(worst_id <= 1e-8, "integral identity dev " + detail::fmt(worst_id));
    c.expect(worst_l < 1e-12, "L* residual " + detail::fmt(worst_l));
    auto op = chogosov_opnorm(ChogosovModel(0.5), 4096);
    const double lam = lambda_fn(0.5);
    c.expect(op.rho_hat >= 0.9 * lam && op.rho_hat <= lam * (1 + 1e-6), "opnorm " + detail::fmt(op.rho_hat));
    double secs = detail::seconds_since(t0);
    c.expect(secs < 120.0, "runtime " + detail::fmt(secs) + " s");
    c.note("KS max " + detail::fmt(worst_ks) + " < " + detail::fmt(ks_crit) + ", opnorm/Lambda " +
           detail::fmt(op.rho_hat / lam));
    return {6, "Chogosov law suite", c.ok(), c.summary(), secs};
}

inline Result criterion_events(std::uint64_t seed)
{
    detail::Checks c;
    auto t0 = std::chrono::steady_clock::now();
    const auto& items = detail::sweep(seed);
    double lo = 1.0, hi = 1.0;
    for (const auto& it : items) {
        lo = std::min(lo, it.rho - it.event_ratio);
        hi = std::min(hi, lambda_fn(std::min(1.0, it.event_ratio)) - it.rho);
    }
    c.expect(lo >= -1e-9, "event ratio exceeds maxcorr by " + detail::fmt(-lo));
    c.expect(hi >= -1e-9, "maxcorr exceeds Lambda(ratio) by " + detail::fmt(-hi));
    NuModel nu(0.5, 0.02, 512);
    auto rep = nu_event_ratio(nu);
    c.expect(rep.worst_ratio <= rep.factor + 2.0 / nu.m,
             "grid ratio " + detail::fmt(rep.worst_ratio) + " > factor " + detail::fmt(rep.factor));
    c.note("min slacks " + detail::fmt(lo) + ", " + detail::fmt(hi) + "; nu ratio " + detail::fmt(rep.worst_ratio) +
           " vs factor " + detail::fmt(rep.factor));
    return {7, "event criteria", c.ok(), c.summary(), detail::seconds_since(t0)};
}

inline Result criterion_glauber(std::uint64_t seed)
{
    detail::Checks c;
    auto t0 = std::chrono::steady_clock::now();
    double s1 = 1.0, s2 = 1.0, prod_dev = 0.0;
    for (std::uint64_t r = 0; r < 200; ++r) {
        std::mt19937_64 rng(derive_seed(seed ^ 0x8888, r));
        int spins = std::uniform_int_distribution<int>(2, 5)(rng);
        double s = 0.2 + 1.3 * uniform01(rng);
        FiniteSystem sys = random_system(rng, spins, 3, s);
        auto b = gap_lower_bounds(measured_epsilon(sys));
        double gap = exact_gap(sys);
        s1 = std::min(s1, gap - b.bound_M);
        s2 = std::min(s2, b.bound_M - b.bound_simple);
    }
    for (std::uint64_t r = 0; r < 20; ++r) {
        std::mt19937_64 rng(derive_seed(seed ^ 0x9999, r));
        FiniteSystem sys = random_product_system(rng, std::uniform_int_distribution<int>(1, 5)(rng), 3);
        prod_dev = std::max(prod_dev, std::abs(exact_gap(sys) - 1.0));
    }
    c.expect(s1 >= -1e-9, "exact gap below |||M|||^-2 by " + detail::fmt(-s1));
    c.expect(s2 >= -1e-9, "|||M|||^-2 below simple bound by " + detail::fmt(-s2));
    c.expect(prod_dev <= 1e-12, "product gap deviates from 1 by " + detail::fmt(prod_dev));

    FiniteSystem tri = detail::spin_cluster(3, 0.4);
    auto eg = exact_gap_detail(tri);
    FiniteGlauberModel model(tri);
    SimulationConfig cfg;
    cfg.max_events = 1000000;
    auto rep = glauber_simulate(
        model, [&](const std::vector<int>& st) { return model.observe_state(st, eg.eigenfunction); }, cfg, seed);
    double rel = std::abs(rep.fitted_rate - eg.gap) / eg.gap;
    c.expect(rel <= 0.10, "simulated rate " + detail::fmt(rep.fitted_rate) + " vs gap " + detail::fmt(eg.gap));
    double secs = detail::seconds_since(t0);
    c.expect(secs < 600.0, "runtime " + detail::fmt(secs) + " s");
    c.note("min slacks " + detail::fmt(s1) + ", " + detail::fmt(s2) + "; simulated/exact " +
           detail::fmt(rep.fitted_rate / eg.gap));
    return {8, "Glauber spectral gap bounds", c.ok(), c.summary(), secs};
}

inline Result criterion_quadratic()
{
    detail::Checks c;
    auto t0 = std::chrono::steady_clock::now();
    const int R = 150;
    auto make = [&](const std::function<double(int)>& g) {
        QuadraticModel m;
        m.gamma = ToeplitzKernel::zeros(1, R);
        for (int z = -R; z <= R; ++z)
            if (z != 0) m.gamma.ref({z}) = g(std::abs(z));
        return m;
    };
    // scaled so that Gamma = 0.6
    auto scaled = [&](QuadraticModel m) {
        double G = m.Gamma();
        for (double& v : m.gamma.values) v *= 0.6 / G;
        return m;
    };
    auto poly = scaled(make([](int z) { return std::pow(1.0 + z, -3.0); }));
    auto expo = scaled(make([](int z) { return std::exp(-0.5 * z); }));
    auto nn2 = nearest_neighbour_quadratic(2, 0.1);

    auto profile_upto = [&](const ToeplitzKernel& k) {
        auto p = shell_profile(k);
        p.resize(std::size_t(std::min<int>(int(p.size()) - 1, R)) + 1);
        return p;
    };
    for (auto* m : {&poly, &expo, &nn2}) {
        auto cov = quadratic_covariance(*m);
        c.expect(std::abs(cov.total - 1.0) <= 1e-10, "sum a_inv - 1 = " + detail::fmt(cov.total - 1.0));
        double es = 0.0;
        for (double v : cov.eps.values) es += v;
        c.expect(es <= cov.Gamma + 1e-12, "sum eps " + detail::fmt(es) + " > Gamma " + detail::fmt(cov.Gamma));
    }
    {
        auto fin = decay_fit(profile_upto(poly.gamma));
        auto fout = decay_fit(profile_upto(quadratic_covariance(poly).a_inv));
        c.expect(fout.cls == DecayClass::polynomial, std::string("polynomial input gave ") + decay_name(fout.cls));
        c.expect(std::abs(fout.exponent - fin.exponent) <= 0.1 * fin.exponent,
                 "exponent " + detail::fmt(fout.exponent) + " vs input " + detail::fmt(fin.exponent));
        c.note("poly exponent in/out " + detail::fmt(fin.exponent) + "/" + detail::fmt(fout.exponent));
    }
    {
        auto fin = decay_fit(profile_upto(expo.gamma));
        auto fout = decay_fit(profile_upto(quadratic_covariance(expo).a_inv));
        c.expect(fout.cls == DecayClass::exponential, std::string("exponential input gave ") + decay_name(fout.cls));
        c.expect(fout.rate <= fin.rate * (1 + 1e-9),
                 "rate " + detail::fmt(fout.rate) + " exceeds input " + detail::fmt(fin.rate));
        c.note("exp rate in/out " + detail::fmt(fin.rate) + "/" + detail::fmt(fout.rate));
    }
    return {9, "quadratic lattice model", c.ok(), c.summary(), detail::seconds_since(t0)};
}

inline Result criterion_conv(std::uint64_t seed)
{
    detail::Checks c;
    auto t0 = std::chrono::steady_clock::now();
    ToeplitzKernel a = ToeplitzKernel::zeros(1, 1);
    a.ref({1}) = std::exp(-1.0);
    auto B = conv_inverse(a);
    double worst = 0.0;
    for (int z = -40; z <= 40; ++z) {
        double want = z > 0 ? std::exp(-double(z)) : 0.0;
        worst = std::max(worst, std::abs(B.b.at({z}) - want));
    }
    c.expect(worst <= 1e-12, "B[e^-1 delta_1] dev " + detail::fmt(worst));

    int bad = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (std::uint64_t r = 0; r < 50; ++r) {
        std::mt19937_64 rng(derive_seed(seed ^ 0xAAAA, r));
        const int n = std::uniform_int_distribution<int>(8, 80)(rng);
        const double gamma = 0.3 + 1.5 * uniform01(rng), amp = 0.1 + 0.9 * uniform01(rng);
        Matrix Mx(n, n);
        for (int i = 0; i < n; ++i) {
            Mx(i, i) = 1.0 + 2.0 * amp * uniform01(rng);
            for (int j = i + 1; j < n; ++j) Mx(i, j) = Mx(j, i) = amp * (2 * uniform01(rng) - 1) * std::exp(-gamma * (j - i));
        }
        // shift to a comfortably positive spectrum
        Eigen::SelfAdjointEigenSolver<Matrix> es0(Mx, Eigen::EigenvaluesOnly);
        double lo0 = es0.eigenvalues().minCoeff();
        if (lo0 < 0.2) Mx.diagonal().array() += 0.2 - lo0;
        Eigen::SelfAdjointEigenSolver<Matrix> es(Mx, Eigen::EigenvaluesOnly);
        double rr = es.eigenvalues().minCoeff(), RR = es.eigenvalues().maxCoeff();
        double A = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) A = std::max(A, std::abs(Mx(i, j)) * std::exp(gamma * std::abs(i - j)));
        auto k = banded_inverse_constants(rr, RR, A, gamma);
        Matrix inv = Mx.inverse();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double bound = k.A_prime * std::exp(-k.gamma_prime * std::abs(i - j));
                double v = std::abs(inv(i, j));
                min_margin = std::min(min_margin, bound - v);
                if (v > bound * (1 + 1e-9)) ++bad;
            }
    }
    c.expect(bad == 0, std::to_string(bad) + " inverse entries above the banded bound");
    c.note("B dev " + detail::fmt(worst) + ", min banded margin " + detail::fmt(min_margin));
    return {10, "convolution inverse and banded decay", c.ok(), c.summary(), detail::seconds_since(t0)};
}

inline Result criterion_clt(std::uint64_t seed)
{
    detail::Checks c;
    auto t0 = std::chrono::steady_clock::now();
    IsingTorus t;
    t.n = 1;
    t.L = 256;
    t.T = 3.0;
    auto rep = clt_experiment(t, [](int s) { return double(s); }, {8, 16, 32}, 10000, seed);
    std::string rows;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& r = rep.rows[i];
        if (i > 0) c.expect(r.cf_distance < rep.rows[i - 1].cf_distance, "cf distance not decreasing at l=" + std::to_string(r.ell));
        c.expect(std::abs(r.sigma_hat2 - r.sigma_block2) <= 0.05 * r.sigma_block2,
                 "variance l=" + std::to_string(r.ell) + ": " + detail::fmt(r.sigma_hat2) + " vs " + detail::fmt(r.sigma_block2));
        rows += (i ? ", " : "") + std::string("l=") + std::to_string(r.ell) + " d=" + detail::fmt(r.cf_distance) +
                " s2=" + detail::fmt(r.sigma_hat2) + "/" + detail::fmt(r.sigma_block2);
    }
    c.expect(rep.rows.back().cf_distance < 0.05, "cf distance at l=32 is " + detail::fmt(rep.rows.back().cf_distance));
    c.note(rows);
    return {11, "block-sum CLT for the Ising chain", c.ok(), c.summary(), detail::seconds_since(t0)};
}

inline Result criterion_ou_chain()
{
    detail::Checks c;
    auto t0 = std::chrono::steady_clock::now();
    OUChainParams p;
    p.K = 16;
    auto st = ou_small_time(p);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
    c.expect(rel(st.c_pp, st.expected_pp) <= 0.02, "pp coefficient " + detail::fmt(st.c_pp));
    c.expect(rel(st.c_pq, st.expected_pq) <= 0.02, "pq coefficient " + detail::fmt(st.c_pq));
    c.expect(rel(st.c_qq, st.expected_qq) <= 0.02, "qq coefficient " + detail::fmt(st.c_qq));
    std::string rows;
    for (double t : {0.01, 0.1, 1.0}) {
        p.t = t;
        double rho = ou_chain_joint(p).maxcorr;
        c.expect(rho < 1.0 - 1e-3, "maxcorr at t=" + detail::fmt(t) + " is 1 - " + detail::fmt(1.0 - rho));
        rows += (rows.empty() ? "" : ", ") + std::string("t=") + detail::fmt(t) + ": 1-rho=" + detail::fmt(1.0 - rho);
    }
    double secs = detail::seconds_since(t0);
    c.expect(secs < 60.0, "runtime " + detail::fmt(secs) + " s");
    c.note(rows);
    return {12, "hypocoercive particle chain", c.ok(), c.summary(), secs};
}

inline Result criterion_three_lines(std::uint64_t seed)
{
    detail::Checks c;
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(derive_seed(seed, 13));
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    int inconsistent = 0;
    for (int r = 0; r < 10000; ++r) {
        Eigen::Vector3d u[3];
        for (auto& v : u) v = Eigen::Vector3d(g(rng), g(rng), g(rng));
        auto rep = three_lines(u[0], u[1], u[2]);
        auto [mn, mx] = std::minmax_element(rep.sine_ratios.begin(), rep.sine_ratios.end());
        worst = std::max(worst, *mx - *mn);
        if (!rep.order_consistent) ++inconsistent;
    }
    c.expect(worst <= 1e-10, "sine ratio spread " + detail::fmt(worst));
    c.expect(inconsistent == 0, std::to_string(inconsistent) + " triples with inconsistent order");
    c.note("max spread " + detail::fmt(worst));
    return {13, "three-lines apparent angles", c.ok(), c.summary(), detail::seconds_since(t0)};
}

/** Every acceptance criterion in order; exceptions are reported as failures. */
inline std::vector<Result> run_all(std::uint64_t seed = 0, const std::function<void(const Result&)>& on_result = {})
{
    std::vector<std::function<Result()>> jobs = {
        [] { return criterion_worked_example(); },
        [] { return criterion_closed_forms(); },
        [&] { return criterion_tensor_sweep(seed); },
        [&] { return criterion_independent_pairs(seed); },
        [&] { return criterion_gaussian_optimality(seed); },
        [&] { return criterion_chogosov(seed); },
        [&] { return criterion_events(seed); },
        [&] { return criterion_glauber(seed); },
        [] { return criterion_quadratic(); },
        [&] { return criterion_conv(seed); },
        [&] { return criterion_clt(seed); },
        [] { return criterion_ou_chain(); },
        [&] { return criterion_three_lines(seed); },
    };
    std::vector<Result> out;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        Result r;
        try {
            r = jobs[i]();
        } catch (const std::exception& e) {
            r = {int(i + 1), "criterion " + std::to_string(i + 1), false, std::string("exception: ") + e.what(), 0.0};
        }
        if (on_result) on_result(r);
        out.push_back(r);
    }
    return out;
}

inline std::string result_line(const Result& r)
{
    std::ostringstream os;
    os << (r.passed ? "PASS" : "FAIL") << " [" << (r.id < 10 ? " " : "") << r.id << "] " << r.title << " ("
       << detail::fmt(r.seconds) << " s)";
    if (!r.detail.empty()) os << " -- " << r.detail;
    return os.str();
}

} // namespace rhomix::verify
