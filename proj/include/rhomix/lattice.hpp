#pragma once

#include "conv.hpp"
#include "core.hpp"
#include "discrete.hpp"
#include "random.hpp"
#include "tensor.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace rhomix {

// ---------------------------------------------------------------------------
// Quadratic (Gaussian) lattice

/** @brief Gaussian field with pinning omega_i^2 / 2 and attractive couplings gamma_z (omega_j - omega_i)^2 / 4. */
struct QuadraticModel {
    ToeplitzKernel gamma;  ///< gamma_z on a window; the origin entry is ignored
    double beta = 1.0;

    int n() const { return gamma.n; }

    double Gamma() const
    {
        KahanSum<double> s;
        for (std::size_t i = 0; i < gamma.values.size(); ++i) {
            auto z = gamma.point(i);
            if (std::any_of(z.begin(), z.end(), [](int c) { return c != 0; })) s.add(gamma.values[i]);
        }
        return s.value() + gamma.tail_l1;
    }
};

inline void validate(const QuadraticModel& m)
{
    validate(m.gamma);
    require(m.beta > 0.0 && std::isfinite(m.beta), ErrorKind::invalid_input, "beta must be > 0");
    for (std::size_t i = 0; i < m.gamma.values.size(); ++i) {
        double v = m.gamma.values[i];
        require(v >= 0.0, ErrorKind::invalid_input, "couplings must be >= 0");
        auto z = m.gamma.point(i);
        for (int& c : z) c = -c;
        require(std::abs(m.gamma.at(z) - v) <= 1e-12 * std::max(1.0, v), ErrorKind::invalid_input,
                "couplings must satisfy gamma_z = gamma_{-z}");
    }
}

/** Nearest-neighbour couplings of strength g on Z^n. */
inline QuadraticModel nearest_neighbour_quadratic(int n, double g)
{
    QuadraticModel m;
    m.gamma = ToeplitzKernel::zeros(n, 1);
    for (int c = 0; c < n; ++c) {
        std::vector<int> z(static_cast<std::size_t>(n), 0);
        z[std::size_t(c)] = 1;
        m.gamma.ref(z) = g;
        z[std::size_t(c)] = -1;
        m.gamma.ref(z) = g;
    }
    return m;
}

struct QuadraticCovariance {
    ToeplitzKernel a_inv;   ///< a_{Q^{-1}}: Cov(omega_i, omega_j) = a_inv(j - i) / beta
    LatticeKernel eps;      ///< a_inv(z) / a_inv(0) for z != 0, zero at the origin
    double Gamma = 0.0;
    double total = 0.0;     ///< sum_z a_inv(z)
    double truncation_l1 = 0.0;
};

/** a_{Q^{-1}} = (1 + Gamma)^{-1} (delta_0 + B[gamma / (1 + Gamma)]). */
inline QuadraticCovariance quadratic_covariance(const QuadraticModel& m)
{
    validate(m);
    QuadraticCovariance out;
    out.Gamma = m.Gamma();
    const double s = 1.0 + out.Gamma;
    ToeplitzKernel at = m.gamma;
    for (std::size_t i = 0; i < at.values.size(); ++i) {
        auto z = at.point(i);
        bool origin = std::all_of(z.begin(), z.end(), [](int c) { return c == 0; });
        at.values[i] = origin ? 0.0 : at.values[i] / s;
    }
    at.tail_l1 = m.gamma.tail_l1 / s;
    ConvInverse B = conv_inverse(at);
    out.a_inv = B.b;
    std::vector<int> zero(static_cast<std::size_t>(m.n()), 0);
    for (double& v : out.a_inv.values) v /= s;
    out.a_inv.ref(zero) += 1.0 / s;
    out.truncation_l1 = B.truncation_l1 / s;
    KahanSum<double> tot;
    for (double v : out.a_inv.values) tot.add(v);
    out.total = tot.value();

    const double a0 = out.a_inv.at(zero);
    out.eps = LatticeKernel::zeros(m.n(), out.a_inv.R);
    out.eps.norm = LatticeNorm::l2;
    for (std::size_t i = 0; i < out.a_inv.values.size(); ++i) {
        auto z = out.a_inv.point(i);
        auto mz = z;
        for (int& c : mz) c = -c;
        bool origin = std::all_of(z.begin(), z.end(), [](int c) { return c == 0; });
        // symmetrise the rounding noise of the series
        double v = 0.5 * (out.a_inv.values[i] + out.a_inv.at(mz));
        out.eps.values[i] = origin ? 0.0 : std::clamp(v / a0, 0.0, 1.0);
    }
    return out;
}

struct QuadraticRhoReport {
    double Gamma = 0.0;
    double eps_sum = 0.0;           ///< sum_{z != 0} eps(z)
    bool gamma_bound_applies = false;  ///< Gamma < 1: every {omega_I : omega_J} <= Gamma
    std::vector<std::pair<double, double>> distance_bounds;  ///< (d, bound)
    SublatticeResult sublattice;
};

inline QuadraticRhoReport quadratic_rho_report(const QuadraticModel& m, const std::vector<double>& distances = {1, 2, 4, 8})
{
    auto cov = quadratic_covariance(m);
    QuadraticRhoReport r;
    r.Gamma = cov.Gamma;
    KahanSum<double> s;
    for (double v : cov.eps.values) s.add(v);
    r.eps_sum = s.value();
    const double a0 = cov.a_inv.at(std::vector<int>(static_cast<std::size_t>(m.n()), 0));
    require(r.eps_sum <= r.Gamma + cov.truncation_l1 / a0 + 1e-12, ErrorKind::invalid_input,
            "correlation sum exceeds Gamma");
    r.gamma_bound_applies = r.Gamma < 1.0;
    for (double d : distances) r.distance_bounds.push_back({d, distance_bound(cov.eps, d).value});
    r.sublattice = sublattice_k(cov.eps);
    return r;
}

// ---------------------------------------------------------------------------
// Ising tori

/** @brief Periodic Ising model, H = -sum over nearest-neighbour edges of w_i w_j, Pr ~ exp(-H / T). */
struct IsingTorus {
    int n = 1;
    int L = 4;
    double T = 1.0;
    std::vector<int> clamp_sites;    ///< flat site indices held fixed
    std::vector<int> clamp_values;   ///< +1 or -1

    std::size_t sites() const
    {
        std::size_t s = 1;
        for (int i = 0; i < n; ++i) s *= std::size_t(L);
        return s;
    }

    std::vector<int> coords(std::size_t site) const
    {
        std::vector<int> c(static_cast<std::size_t>(n));
        for (int i = n; i-- > 0;) {
            c[std::size_t(i)] = int(site % std::size_t(L));
            site /= std::size_t(L);
        }
        return c;
    }

    std::size_t site(const std::vector<int>& c) const
    {
        std::size_t s = 0;
        for (int v : c) s = s * std::size_t(L) + std::size_t(((v % L) + L) % L);
        return s;
    }

    /** Forward neighbours i + e_d, one per direction; each edge appears once. */
    std::vector<std::size_t> forward(std::size_t s) const
    {
        std::vector<std::size_t> out;
        auto c = coords(s);
        for (int d = 0; d < n; ++d) {
            auto e = c;
            e[std::size_t(d)] += 1;
            out.push_back(site(e));
        }
        return out;
    }

    /** Neighbours i +- e_d (with multiplicity on a side-2 torus). */
    std::vector<std::size_t> neighbours(std::size_t s) const
    {
        std::vector<std::size_t> out;
        auto c = coords(s);
        for (int d = 0; d < n; ++d)
            for (int sg : {-1, 1}) {
                auto e = c;
                e[std::size_t(d)] += sg;
                out.push_back(site(e));
            }
        return out;
    }
};

inline void validate(const IsingTorus& t)
{
    require(t.n >= 1 && t.n <= 4, ErrorKind::invalid_input, "torus dimension must be in 1..4");
    require(t.L >= 2, ErrorKind::invalid_input, "torus side must be >= 2");
    require(t.T > 0.0 && std::isfinite(t.T), ErrorKind::invalid_input, "temperature must be > 0");
    require(t.clamp_sites.size() == t.clamp_values.size(), ErrorKind::invalid_input, "clamp sites and values differ in length");
    for (std::size_t i = 0; i < t.clamp_sites.size(); ++i) {
        require(t.clamp_sites[i] >= 0 && std::size_t(t.clamp_sites[i]) < t.sites(), ErrorKind::invalid_input,
                "clamp site out of range");
        require(t.clamp_values[i] == 1 || t.clamp_values[i] == -1, ErrorKind::invalid_input, "clamp values must be +-1");
    }
}

inline constexpr std::size_t max_exact_ising_sites = 16;

/** Spin of digit d in a FiniteSystem built by ising_exact. */
inline int spin_of(int digit) { return digit == 0 ? -1 : 1; }

/**
 * Gibbs measure of the free (unclamped) sites as a FiniteSystem; variable k is the k-th
 * free site in increasing index order, digit 0 = spin -1.
 */
inline FiniteSystem ising_exact(const IsingTorus& t, std::vector<int>* free_sites = nullptr)
{
    validate(t);
    const std::size_t S = t.sites();
    require(S <= max_exact_ising_sites, ErrorKind::size_cap, "exact Ising enumeration limited to 16 sites");
    std::vector<int> fixed(S, 0);
    for (std::size_t i = 0; i < t.clamp_sites.size(); ++i) fixed[std::size_t(t.clamp_sites[i])] = t.clamp_values[i];
    std::vector<int> freev;
    for (std::size_t s = 0; s < S; ++s)
        if (fixed[s] == 0) freev.push_back(int(s));
    require(!freev.empty(), ErrorKind::invalid_input, "every site is clamped");
    std::vector<Variable> vars;
    for (int s : freev) vars.push_back({"s" + std::to_string(s), 2});
    std::vector<std::vector<std::size_t>> fwd(S);
    for (std::size_t s = 0; s < S; ++s) fwd[s] = t.forward(s);
    std::vector<int> spin(S);
    // energies are shifted by the ground-state bound to keep weights finite
    const double shift = double(S * std::size_t(t.n));
    auto sys = FiniteSystem::from_weights(vars, [&](const std::vector<int>& d) {
        for (std::size_t s = 0; s < S; ++s) spin[s] = fixed[s];
        for (std::size_t k = 0; k < freev.size(); ++k) spin[std::size_t(freev[k])] = spin_of(d[k]);
        double e = 0.0;
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t j : fwd[s]) e -= double(spin[s] * spin[j]);
        return std::exp(-(e + shift) / t.T);
    });
    if (free_sites) *free_sites = freev;
    return sys;
}

/** c0 = 1 / (2 p (1 - p)) with p = 1 / (exp(4n/T) + 1), i.e. cosh(4n/T) + 1. */
inline double ising_c0(int n, double T) { return std::cosh(4.0 * n / T) + 1.0; }

/** k0 = 1 - 4 / (exp(8n/T) + 2 exp((4n+2)/T) + 1). */
inline double ising_k0(int n, double T)
{
    return 1.0 - 4.0 / (std::exp(8.0 * n / T) + 2.0 * std::exp((4.0 * n + 2.0) / T) + 1.0);
}

enum class EpsilonMethod { exact, mcmc };

struct IsingEpsilon {
    LatticeKernel kernel;          ///< eps(z) for offsets |z_c| <= (L-1)/2, zero at the origin
    LatticeKernel ci_low, ci_high; ///< Wilson 95% bounds (mcmc only)
    double c0 = 0.0;
    double k0 = 0.0;
    bool subjective = false;       ///< sup over clamped contexts (exact path, <= 10 sites)
    std::size_t samples = 0;
};

/** @brief Heat-bath view of an Ising torus for the Glauber simulator. */
class IsingGlauberModel {
public:
    explicit IsingGlauberModel(const IsingTorus& t) : t_(t)
    {
        validate(t);
        nb_.resize(t.sites());
        for (std::size_t s = 0; s < t.sites(); ++s) nb_[s] = t.neighbours(s);
        fixed_.assign(t.sites(), 0);
        for (std::size_t i = 0; i < t.clamp_sites.size(); ++i) fixed_[std::size_t(t.clamp_sites[i])] = t.clamp_values[i];
    }

    int sites() const { return int(t_.sites()); }
    int alphabet(int) const { return 2; }

    /** Digit 1 is spin +1. */
    void conditional(const std::vector<int>& state, int i, std::vector<double>& out) const
    {
        out.assign(2, 0.0);
        if (fixed_[std::size_t(i)] != 0) {
            out[fixed_[std::size_t(i)] > 0 ? 1 : 0] = 1.0;
            return;
        }
        double h = 0.0;
        for (std::size_t j : nb_[std::size_t(i)]) h += spin_of(state[j]);
        double up = 1.0 / (1.0 + std::exp(-2.0 * h / t_.T));
        out[0] = 1.0 - up;
        out[1] = up;
    }

    std::vector<int> initial(std::mt19937_64& rng) const
    {
        std::vector<int> s(t_.sites());
        for (std::size_t i = 0; i < s.size(); ++i)
            s[i] = fixed_[i] != 0 ? (fixed_[i] > 0) : int(rng() & 1u);
        return s;
    }

    /** One systematic heat-bath sweep. */
    void sweep(std::vector<int>& state, std::mt19937_64& rng) const
    {
        std::vector<double> c;
        for (int i = 0; i < sites(); ++i) {
            conditional(state, i, c);
            state[std::size_t(i)] = uniform01(rng) < c[1] ? 1 : 0;
        }
    }

private:
    IsingTorus t_;
    std::vector<std::vector<std::size_t>> nb_;
    std::vector<int> fixed_;
};

namespace detail {

inline std::pair<double, double> wilson(double k, double n, double z = 1.959963984540054)
{
    double p = k / n, den = 1.0 + z * z / n;
    double c = (p + z * z / (2 * n)) / den;
    double h = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den;
    return {std::max(0.0, c - h), std::min(1.0, c + h)};
}

} // namespace detail

struct McmcBudget {
    std::size_t burn_in = 2000;    ///< sweeps
    std::size_t samples = 20000;   ///< recorded configurations
    std::size_t thin = 2;          ///< sweeps between records
};

/**
 * Pairwise maximal correlations eps(z) = {w_0 : w_z}. The exact path enumerates the
 * Gibbs measure (and takes the sup over clamped contexts for <= 10 sites); the mcmc path
 * uses pair tables from thinned heat-bath sweeps, averaged over translations.
 */
inline IsingEpsilon ising_epsilon(const IsingTorus& t, EpsilonMethod method, std::uint64_t seed = 0,
                                  const McmcBudget& budget = {})
{
    validate(t);
    IsingEpsilon out;
    out.c0 = ising_c0(t.n, t.T);
    out.k0 = ising_k0(t.n, t.T);
    const int R = (t.L - 1) / 2;
    out.kernel = LatticeKernel::zeros(t.n, R);
    out.kernel.norm = LatticeNorm::l1;

    if (method == EpsilonMethod::exact) {
        require(t.clamp_sites.empty(), ErrorKind::invalid_input, "clamped tori are scanned through ising_exact");
        auto sys = ising_exact(t);
        out.subjective = t.sites() <= 10;
        for (std::size_t i = 0; i < out.kernel.values.size(); ++i) {
            auto z = out.kernel.point(i);
            if (std::all_of(z.begin(), z.end(), [](int c) { return c == 0; })) continue;
            int j = int(t.site(z));
            double e;
            if (out.subjective) {
                std::vector<int> pool;
                for (int k = 0; k < int(t.sites()); ++k)
                    if (k != 0 && k != j) pool.push_back(k);
                e = subjective_maxcorr(sys, 0, j, pool);
            } else {
                e = maxcorr_blocks(sys, {0}, {j});
            }
            out.kernel.values[i] = e;
        }
        return out;
    }

    require(budget.samples >= 10 && budget.thin >= 1, ErrorKind::budget, "mcmc budget too small");
    IsingGlauberModel model(t);
    std::mt19937_64 rng(seed);
    auto state = model.initial(rng);
    for (std::size_t s = 0; s < budget.burn_in; ++s) model.sweep(state, rng);
    const std::size_t S = t.sites();
    std::vector<std::array<double, 4>> tables(out.kernel.values.size(), {0, 0, 0, 0});
    std::vector<std::size_t> offset_site(out.kernel.values.size());
    for (std::size_t i = 0; i < offset_site.size(); ++i) offset_site[i] = t.site(out.kernel.point(i));
    std::vector<std::vector<std::size_t>> shifted(offset_site.size(), std::vector<std::size_t>(S));
    for (std::size_t k = 0; k < offset_site.size(); ++k) {
        auto z = out.kernel.point(k);
        for (std::size_t s = 0; s < S; ++s) {
            auto c = t.coords(s);
            for (std::size_t d = 0; d < c.size(); ++d) c[d] += z[d];
            shifted[k][s] = t.site(c);
        }
    }
    for (std::size_t r = 0; r < budget.samples; ++r) {
        for (std::size_t s = 0; s < budget.thin; ++s) model.sweep(state, rng);
        for (std::size_t k = 0; k < tables.size(); ++k)
            for (std::size_t s = 0; s < S; ++s) tables[k][std::size_t(2 * state[s] + state[shifted[k][s]])] += 1.0;
    }
    out.samples = budget.samples;
    out.ci_low = out.kernel;
    out.ci_high = out.kernel;
    for (std::size_t k = 0; k < tables.size(); ++k) {
        auto z = out.kernel.point(k);
        if (std::all_of(z.begin(), z.end(), [](int c) { return c == 0; })) continue;
        double tot = tables[k][0] + tables[k][1] + tables[k][2] + tables[k][3];
        Matrix j(2, 2);
        j << tables[k][0] / tot, tables[k][1] / tot, tables[k][2] / tot, tables[k][3] / tot;
        out.kernel.values[k] = maxcorr_2x2(j);
        // agreement rate on independent sweeps; sites within a sweep are not independent
        double agree = (tables[k][0] + tables[k][3]) / tot;
        auto [lo, hi] = detail::wilson(agree * double(budget.samples), double(budget.samples));
        double a = std::abs(2 * lo - 1), b = std::abs(2 * hi - 1);
        out.ci_low.values[k] = (lo <= 0.5 && hi >= 0.5) ? 0.0 : std::min(a, b);
        out.ci_high.values[k] = std::max(a, b);
    }
    // symmetrise the estimates, which are exact mirror images only in expectation
    for (auto* ker : {&out.kernel, &out.ci_low, &out.ci_high}) {
        std::vector<double> v = ker->values;
        for (std::size_t k = 0; k < v.size(); ++k) {
            auto mz = ker->point(k);
            for (int& c : mz) c = -c;
            ker->values[k] = 0.5 * (v[k] + v[ker->index(mz)]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spatial central limit harness

enum class BlockShape { cube, disk };

struct CLTRow {
    int ell = 0;
    std::size_t block_sites = 0;
    double sigma_hat2 = 0.0;     ///< sample Var(F) / |block|
    double sigma_block2 = 0.0;   ///< exact Var(F) / |block| when known, else 0
    double cf_distance = 0.0;    ///< sup over lambda in [-3, 3] of |phi_hat - exp(-sigma_hat2 lambda^2 / 2)|
};

struct CLTReport {
    std::vector<CLTRow> rows;
    double sigma2_limit = 0.0;   ///< infinite-volume variance when known
};

namespace detail {

inline std::vector<std::vector<int>> block_offsets(int n, int ell, BlockShape shape)
{
    std::vector<std::vector<int>> out;
    std::vector<int> z(static_cast<std::size_t>(n), 0);
    const double c = (ell - 1) / 2.0, r2 = sqr(ell / 2.0);
    while (true) {
        double d = 0.0;
        for (int v : z) d += sqr(v - c);
        if (shape == BlockShape::cube || n == 1 || d <= r2) out.push_back(z);
        int i = n - 1;
        while (i >= 0 && ++z[std::size_t(i)] == ell) z[std::size_t(i--)] = 0;
        if (i < 0) break;
    }
    return out;
}

/** Sup distance between the symmetrised empirical characteristic function and a centred Gaussian one. */
inline double cf_distance(const std::vector<double>& x, double var)
{
    double worst = 0.0;
    for (int g = -300; g <= 300; ++g) {
        double lam = g * 0.01;
        double s = 0.0;
        for (double v : x) s += std::cos(lam * v);
        worst = std::max(worst, std::abs(s / double(x.size()) - std::exp(-var * lam * lam / 2.0)));
    }
    return worst;
}

inline CLTRow summarise(int ell, std::size_t sites, std::vector<double> F)
{
    CLTRow row;
    row.ell = ell;
    row.block_sites = sites;
    double mean = 0.0;
    for (double v : F) mean += v;
    mean /= double(F.size());
    double var = 0.0;
    for (double& v : F) {
        v = (v - mean) / std::sqrt(double(sites));
        var += v * v;
    }
    var /= double(F.size() - 1);
    row.sigma_hat2 = var;
    row.cf_distance = cf_distance(F, var);
    return row;
}

/** Exact draw of a 1D periodic Ising chain by sequential sampling against the transfer matrix. */
inline void sample_ising_ring(int L, double T, std::mt19937_64& rng, std::vector<int>& out)
{
    const double w = std::exp(1.0 / T), iw = std::exp(-1.0 / T), th = std::tanh(1.0 / T);
    // k-th power of the transfer matrix [[w, iw], [iw, w]] divided by (w + iw)^k
    auto Tk = [&](int k, int a, int b) {
        double m = std::pow(th, k);
        return 0.5 * (1.0 + (a == b ? m : -m));
    };
    out.assign(std::size_t(L), 0);
    out[0] = (rng() & 1u) ? 1 : -1;
    auto idx = [](int s) { return s > 0 ? 1 : 0; };
    for (int k = 1; k < L; ++k) {
        int prev = idx(out[std::size_t(k - 1)]), first = idx(out[0]);
        double up = (prev == 1 ? w : iw) * Tk(L - k, 1, first);
        double dn = (prev == 0 ? w : iw) * Tk(L - k, 0, first);
        out[std::size_t(k)] = uniform01(rng) * (up + dn) < up ? 1 : -1;
    }
}

} // namespace detail

inline constexpr std::size_t max_clt_work = std::size_t(4) << 30;

/**
 * Block sums F(ell) = sum of f over a block, one independent configuration per replica;
 * all block sizes are read from the same configuration (nested blocks at the origin).
 * One-dimensional tori are sampled exactly, others by heat-bath sweeps.
 */
inline CLTReport clt_experiment(const IsingTorus& t, const std::function<double(int)>& f, const std::vector<int>& ells,
                                std::size_t replicas, std::uint64_t seed, BlockShape shape = BlockShape::cube,
                                const McmcBudget& budget = {200, 0, 5})
{
    validate(t);
    require(!ells.empty() && replicas >= 2, ErrorKind::invalid_input, "need block sizes and >= 2 replicas");
    for (int l : ells) require(l >= 1 && l <= t.L, ErrorKind::invalid_input, "block side must be in 1..L");
    require(t.clamp_sites.empty(), ErrorKind::invalid_input, "clt experiment uses the free torus");
    const std::size_t per = t.n == 1 ? std::size_t(t.L) : t.sites() * (budget.burn_in + 1);
    require(double(per) * double(replicas) <= double(max_clt_work), ErrorKind::budget, "clt budget exceeds work cap");

    std::vector<std::vector<std::size_t>> blocks;
    for (int l : ells) {
        std::vector<std::size_t> b;
        for (const auto& z : detail::block_offsets(t.n, l, shape)) b.push_back(t.site(z));
        blocks.push_back(b);
    }
    std::vector<std::vector<double>> F(ells.size(), std::vector<double>(replicas));
    IsingGlauberModel model(t);
    std::vector<int> spins;
    for (std::size_t r = 0; r < replicas; ++r) {
        std::mt19937_64 rng(derive_seed(seed, r));
        if (t.n == 1) {
            detail::sample_ising_ring(t.L, t.T, rng, spins);
        } else {
            auto st = model.initial(rng);
            for (std::size_t s = 0; s < budget.burn_in; ++s) model.sweep(st, rng);
            spins.resize(st.size());
            for (std::size_t i = 0; i < st.size(); ++i) spins[i] = spin_of(st[i]);
        }
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            double s = 0.0;
            for (std::size_t site : blocks[b]) s += f(spins[site]);
            F[b][r] = s;
        }
    }
    CLTReport rep;
    const double theta = std::tanh(1.0 / t.T);
    if (t.n == 1) rep.sigma2_limit = (1.0 + theta) / (1.0 - theta);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        auto row = detail::summarise(ells[b], blocks[b].size(), F[b]);
        if (t.n == 1) {
            // exact block variance on the ring: sum over pairs of (theta^d + theta^{L-d}) / (1 + theta^L)
            const int l = ells[b], L = t.L;
            double v = 0.0;
            for (int i = 0; i < l; ++i)
                for (int j = 0; j < l; ++j) {
                    int d = std::abs(i - j);
                    v += (std::pow(theta, d) + std::pow(theta, L - d)) / (1.0 + std::pow(theta, L));
                }
            row.sigma_block2 = v / l;
        }
        rep.rows.push_back(row);
    }
    return rep;
}

/** Quadratic model: F(ell) is Gaussian with variance sum_{i,j in block} a_inv(j - i) / beta. */
inline CLTReport clt_experiment(const QuadraticModel& m, const std::vector<int>& ells, std::size_t replicas,
                                std::uint64_t seed)
{
    auto cov = quadratic_covariance(m);
    require(!ells.empty() && replicas >= 2, ErrorKind::invalid_input, "need block sizes and >= 2 replicas");
    CLTReport rep;
    rep.sigma2_limit = cov.total / m.beta;
    for (int l : ells) {
        require(l >= 1, ErrorKind::invalid_input, "block side must be >= 1");
        double var = 0.0;
        for (std::size_t i = 0; i < cov.a_inv.values.size(); ++i) {
            double mult = 1.0;
            for (int c : cov.a_inv.point(i)) mult *= std::max(0, l - std::abs(c));
            var += mult * cov.a_inv.values[i];
        }
        var /= m.beta;
        const double sites = std::pow(double(l), double(m.n()));
        std::mt19937_64 rng(derive_seed(seed, std::uint64_t(l)));
        std::normal_distribution<double> g(0.0, std::sqrt(var));
        std::vector<double> F(replicas);
        for (double& x : F) x = g(rng);
        auto row = detail::summarise(l, std::size_t(sites), F);
        row.sigma_block2 = var / sites;
        rep.rows.push_back(row);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Characteristic functions of identically distributed blocks

struct PhaseProductCheck {
    double lhs = 0.0;       ///< |E[prod Phi_i] - phi^N|
    double rhs = 0.0;       ///< N eps_bar (1 + eps_bar) (1 - |phi|^2)
    double eps_bar = 0.0;   ///< max_i sum_{j != i} eps_ij
    std::complex<double> phi;
    bool holds = false;     ///< lhs <= rhs + 1e-9
};

/**
 * Phi_i = exp(i lambda g(block_i)); eps_ij are subjective correlations of the blocks
 * conditioned on subsets of the remaining variables.
 */
inline PhaseProductCheck phase_product_bound(const FiniteSystem& sys, const std::vector<std::vector<int>>& blocks,
                                             double lambda,
                                             const std::function<double(const std::vector<int>&)>& g = {})
{
    require(!blocks.empty(), ErrorKind::invalid_input, "need at least one block");
    for (std::size_t i = 0; i < blocks.size(); ++i)
        for (std::size_t j = i + 1; j < blocks.size(); ++j)
            require(!detail::intersects(blocks[i], blocks[j]), ErrorKind::overlap, "blocks must be disjoint");
    auto value = [&](const std::vector<int>& d) {
        if (g) return g(d);
        double s = 0.0;
        for (int v : d) s += v;
        return s;
    };
    auto first = block_marginal(sys, blocks[0]);
    for (std::size_t i = 1; i < blocks.size(); ++i) {
        require(sys.block_size(blocks[i]) == sys.block_size(blocks[0]), ErrorKind::distribution_mismatch,
                "blocks have different alphabets");
        auto m = block_marginal(sys, blocks[i]);
        for (std::size_t k = 0; k < m.size(); ++k)
            require(std::abs(m[k] - first[k]) <= 1e-12, ErrorKind::distribution_mismatch,
                    "blocks are not identically distributed");
    }
    const std::size_t N = blocks.size();
    PhaseProductCheck out;
    std::complex<double> prod_mean = 0.0;
    std::vector<int> vals;
    for (std::size_t x = 0; x < sys.num_states(); ++x) {
        double p = sys.prob(x);
        if (p == 0.0) continue;
        double phase = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            vals.clear();
            for (int v : blocks[i]) vals.push_back(sys.digit(x, std::size_t(v)));
            double gi = value(vals);
            phase += gi;
            if (i == 0) out.phi += p * std::polar(1.0, lambda * gi);
        }
        prod_mean += p * std::polar(1.0, lambda * phase);
    }
    Matrix eps = Matrix::Zero(Index(N), Index(N));
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j) {
            std::vector<int> pool;
            for (int v = 0; v < int(sys.num_vars()); ++v) {
                bool used = std::find(blocks[i].begin(), blocks[i].end(), v) != blocks[i].end() ||
                            std::find(blocks[j].begin(), blocks[j].end(), v) != blocks[j].end();
                if (!used) pool.push_back(v);
            }
            eps(Index(i), Index(j)) = eps(Index(j), Index(i)) = subjective_maxcorr(sys, blocks[i], blocks[j], pool);
        }
    for (Index i = 0; i < Index(N); ++i) out.eps_bar = std::max(out.eps_bar, eps.row(i).sum());
    out.lhs = std::abs(prod_mean - std::pow(out.phi, double(N)));
    out.rhs = double(N) * out.eps_bar * (1.0 + out.eps_bar) * (1.0 - std::norm(out.phi));
    out.holds = out.lhs <= out.rhs + 1e-9;
    return out;
}

} // namespace rhomix
