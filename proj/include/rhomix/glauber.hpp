#pragma once

#include "core.hpp"
#include "discrete.hpp"
#include "linalg.hpp"
#include "random.hpp"
#include "tensor.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace rhomix {

/** @brief Spectral-gap lower bounds from a pairwise correlation matrix. */
struct GapBoundReport {
    Matrix M;
    Matrix Mprime;
    bool mprime_defined = false;  ///< false when the spectral radius of eps is >= 1
    double bound_M = 0.0;         ///< |||M|||^{-2}
    double bound_Mprime = 0.0;    ///< |||M'|||^{-2}, 0 when undefined
    double bound_simple = 0.0;    ///< (1 - |||eps|||)_+^2
};

/** Upper-triangular construction: (I - U)^{-1} diag(1~) with U_ij = eps~_ij. */
inline Matrix glauber_M(const Matrix& eps)
{
    const Index N = eps.rows();
    Matrix U = Matrix::Zero(N, N);
    Vector ones(N);
    for (Index i = 0; i < N; ++i) {
        double prod = 1.0;
        for (Index j = i + 1; j < N; ++j) {
            prod *= 1.0 - eps(i, j) * eps(i, j);
            U(i, j) = eps(i, j) / prod;
        }
        ones(i) = 1.0 / prod;
    }
    Matrix IU = Matrix::Identity(N, N) - U;
    Matrix inv = IU.triangularView<Eigen::Upper>().solve(Matrix::Identity(N, N));
    return inv * ones.asDiagonal();
}

inline GapBoundReport gap_lower_bounds(const Matrix& eps)
{
    require(eps.rows() == eps.cols() && eps.rows() >= 1, ErrorKind::invalid_input, "eps must be square");
    const Index N = eps.rows();
    for (Index i = 0; i < N; ++i)
        for (Index j = 0; j < N; ++j) {
            if (i == j) continue;
            double e = eps(i, j);
            require(std::isfinite(e) && e >= 0.0 && e <= 1.0, ErrorKind::invalid_input, "eps entries must lie in [0,1]");
            require(std::abs(e - eps(j, i)) <= tol::symmetric, ErrorKind::invalid_input, "eps must be symmetric");
            require(e < 1.0, ErrorKind::undefined, "eps_ij = 1: the gap matrix is undefined");
        }
    Matrix off = eps;
    off.diagonal().setZero();

    GapBoundReport r;
    r.M = glauber_M(off);
    r.bound_M = 1.0 / sqr(spectral_norm(r.M));

    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (off + off.transpose()), Eigen::EigenvaluesOnly);
    double norm = N > 1 ? es.eigenvalues().cwiseAbs().maxCoeff() : 0.0;
    r.bound_simple = sqr(std::max(0.0, 1.0 - norm));
    // spectral radius equals the norm for a symmetric nonnegative matrix
    if (norm < 1.0) {
        r.mprime_defined = true;
        r.Mprime = (Matrix::Identity(N, N) - off).inverse();
        r.bound_Mprime = 1.0 / sqr(spectral_norm(r.Mprime));
    }
    return r;
}

/** Matrix of measured subjective correlations {X_i : X_j} conditioned on subsets of the other sites. */
inline Matrix measured_epsilon(const FiniteSystem& sys)
{
    const int N = int(sys.num_vars());
    Matrix e = Matrix::Zero(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j) {
            std::vector<int> pool;
            for (int k = 0; k < N; ++k)
                if (k != i && k != j) pool.push_back(k);
            e(i, j) = e(j, i) = subjective_maxcorr(sys, i, j, pool);
        }
    return e;
}

// ---------------------------------------------------------------------------
// Exact dynamics on small systems

inline constexpr std::size_t max_gap_states = std::size_t(1) << 12;

/** Heat-bath generator: rate pi(y | x_{-i}) from x to each y differing from x at site i only. */
inline Matrix glauber_generator(const FiniteSystem& sys)
{
    const std::size_t S = sys.num_states(), N = sys.num_vars();
    require(S <= max_gap_states, ErrorKind::size_cap, "exact dynamics limited to 2^12 states");
    Matrix L = Matrix::Zero(Index(S), Index(S));
    for (std::size_t x = 0; x < S; ++x) {
        if (sys.prob(x) <= 0.0) continue;
        for (std::size_t i = 0; i < N; ++i) {
            const std::size_t st = sys.stride(i);
            const int xi = sys.digit(x, i);
            const std::size_t base = x - std::size_t(xi) * st;
            double ctx = 0.0;
            for (int v = 0; v < sys.size(i); ++v) ctx += sys.prob(base + std::size_t(v) * st);
            for (int v = 0; v < sys.size(i); ++v) {
                if (v == xi) continue;
                std::size_t y = base + std::size_t(v) * st;
                double rate = sys.prob(y) / ctx;
                L(Index(x), Index(y)) += rate;
                L(Index(x), Index(x)) -= rate;
            }
        }
    }
    return L;
}

struct ExactGap {
    double gap = 0.0;
    std::vector<double> eigenfunction;  ///< slowest mean-zero mode, unit variance, zero off the support
};

/**
 * Smallest eigenvalue of the Dirichlet form sum_i E[Var(f | rest)] on mean-zero
 * functions, in the Pr-weighted inner product.
 */
inline ExactGap exact_gap_detail(const FiniteSystem& sys)
{
    const std::size_t S = sys.num_states();
    require(S <= max_gap_states, ErrorKind::size_cap, "exact gap limited to 2^12 states");
    std::vector<Index> support;
    for (std::size_t x = 0; x < S; ++x)
        if (sys.prob(x) > 0.0) support.push_back(Index(x));
    const Index n = Index(support.size());
    ExactGap out;
    out.eigenfunction.assign(S, 0.0);
    if (n <= 1) return out;
    Matrix L = glauber_generator(sys);
    Matrix H(n, n);
    for (Index a = 0; a < n; ++a)
        for (Index b = 0; b < n; ++b) {
            double pa = sys.prob(std::size_t(support[std::size_t(a)]));
            double pb = sys.prob(std::size_t(support[std::size_t(b)]));
            H(a, b) = -std::sqrt(pa / pb) * L(support[std::size_t(a)], support[std::size_t(b)]);
        }
    H = 0.5 * (H + H.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    out.gap = std::max(0.0, es.eigenvalues()(1));
    Vector v = es.eigenvectors().col(1);
    for (Index a = 0; a < n; ++a) {
        std::size_t x = std::size_t(support[std::size_t(a)]);
        out.eigenfunction[x] = v(a) / std::sqrt(sys.prob(x));
    }
    return out;
}

inline double exact_gap(const FiniteSystem& sys) { return exact_gap_detail(sys).gap; }

// ---------------------------------------------------------------------------
// Continuous-time simulation

/**
 * @brief Local heat-bath view of a FiniteSystem.
 * A model for the simulator supplies sites(), alphabet(i), conditional(state, i, out)
 * and initial(rng).
 */
class FiniteGlauberModel {
public:
    explicit FiniteGlauberModel(const FiniteSystem& sys) : sys_(&sys) {}

    int sites() const { return int(sys_->num_vars()); }
    int alphabet(int i) const { return sys_->size(std::size_t(i)); }

    void conditional(const std::vector<int>& state, int i, std::vector<double>& out) const
    {
        std::vector<int> d = state;
        out.assign(std::size_t(alphabet(i)), 0.0);
        double s = 0.0;
        for (int v = 0; v < alphabet(i); ++v) {
            d[std::size_t(i)] = v;
            out[std::size_t(v)] = sys_->prob(sys_->encode(d));
            s += out[std::size_t(v)];
        }
        for (double& p : out) p /= s;
    }

    /** Exact draw from the stationary law. */
    std::vector<int> initial(std::mt19937_64& rng) const
    {
        double u = uniform01(rng), c = 0.0;
        std::size_t last = 0;
        for (std::size_t x = 0; x < sys_->num_states(); ++x) {
            if (sys_->prob(x) <= 0.0) continue;
            last = x;
            c += sys_->prob(x);
            if (u < c) return sys_->decode(x);
        }
        return sys_->decode(last);
    }

    double observe_state(const std::vector<int>& s, const std::vector<double>& f) const { return f[sys_->encode(s)]; }

private:
    const FiniteSystem* sys_;
};

struct TrajectoryEvent {
    double time = 0.0;
    int site = 0;
    int new_state = 0;
};

struct SimulationConfig {
    double horizon = std::numeric_limits<double>::infinity();  ///< simulated time
    std::size_t max_events = 1000000;
    double dt = 0.1;            ///< sampling step of the observable
    std::size_t max_lag = 4096;
    bool record = false;        ///< keep the full trajectory
};

struct SimulationReport {
    std::vector<TrajectoryEvent> trajectory;
    std::size_t events = 0;
    double time = 0.0;
    std::vector<double> autocorrelation;  ///< at lags k * dt
    double fitted_rate = 0.0;
    double relaxation_time = 0.0;
};

namespace detail {

/** Exponential fit of the autocorrelation on [0.1, 3] estimated relaxation times. */
inline double fit_decay_rate(const std::vector<double>& C, double dt)
{
    double tau = 0.0;
    for (std::size_t k = 1; k < C.size(); ++k)
        if (C[k] < std::exp(-1.0)) {
            double a = C[k - 1], b = C[k];
            double frac = (a - std::exp(-1.0)) / (a - b);
            tau = (double(k - 1) + frac) * dt;
            break;
        }
    if (tau <= 0.0) tau = double(C.size() - 1) * dt / 3.0;
    double rate = 1.0 / tau;
    for (int iter = 0; iter < 4; ++iter) {
        double t0 = 0.1 / rate, t1 = 3.0 / rate;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int cnt = 0;
        for (std::size_t k = 0; k < C.size(); ++k) {
            double t = double(k) * dt;
            if (t < t0 || t > t1 || C[k] <= 0.0) continue;
            double y = std::log(C[k]);
            sx += t;
            sy += y;
            sxx += t * t;
            sxy += t * y;
            ++cnt;
        }
        if (cnt < 3) break;
        double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
        if (!(slope < 0.0)) break;
        rate = -slope;
    }
    return rate;
}

} // namespace detail

/**
 * Gillespie realisation of the heat-bath dynamics: each site carries a rate-1 clock and,
 * when it rings, is resampled from its conditional law given the rest. The observable
 * is sampled on a regular grid and its autocorrelation fitted by an exponential.
 */
template <typename Model, typename Observable>
SimulationReport glauber_simulate(const Model& model, Observable&& f, const SimulationConfig& cfg, std::uint64_t seed)
{
    require(cfg.horizon > 0.0, ErrorKind::invalid_input, "horizon must be > 0");
    require(cfg.dt > 0.0, ErrorKind::invalid_input, "sampling step must be > 0");
    std::mt19937_64 rng(seed);
    const int N = model.sites();
    std::vector<int> state = model.initial(rng);
    std::exponential_distribution<double> clock(static_cast<double>(N));
    std::uniform_int_distribution<int> pick(0, N - 1);
    std::vector<double> cond;

    SimulationReport rep;
    std::vector<double> samples;
    double t = 0.0, next_sample = 0.0, value = f(state);
    while (rep.events < cfg.max_events) {
        double tn = t + clock(rng);
        if (tn > cfg.horizon) {
            tn = cfg.horizon;
        }
        while (next_sample < tn) {
            samples.push_back(value);
            next_sample += cfg.dt;
        }
        if (tn >= cfg.horizon) {
            t = tn;
            break;
        }
        t = tn;
        int i = pick(rng);
        model.conditional(state, i, cond);
        double u = uniform01(rng), c = 0.0;
        int v = int(cond.size()) - 1;
        for (std::size_t a = 0; a < cond.size(); ++a) {
            c += cond[a];
            if (u < c) {
                v = int(a);
                break;
            }
        }
        state[std::size_t(i)] = v;
        value = f(state);
        ++rep.events;
        if (cfg.record) rep.trajectory.push_back({t, i, v});
    }
    rep.time = t;

    const std::size_t n = samples.size();
    if (n < 16) return rep;
    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= double(n);
    double var = 0.0;
    for (double x : samples) var += sqr(x - mean);
    var /= double(n);
    if (var <= 0.0) return rep;
    const std::size_t lags = std::min(cfg.max_lag, n / 4);
    rep.autocorrelation.push_back(1.0);
    for (std::size_t k = 1; k < lags; ++k) {
        double s = 0.0;
        for (std::size_t a = 0; a + k < n; ++a) s += (samples[a] - mean) * (samples[a + k] - mean);
        double ck = s / double(n - k) / var;
        rep.autocorrelation.push_back(ck);
        if (ck < std::exp(-4.0)) break;
    }
    rep.fitted_rate = detail::fit_decay_rate(rep.autocorrelation, cfg.dt);
    rep.relaxation_time = rep.fitted_rate > 0.0 ? 1.0 / rep.fitted_rate : 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// Infinite lattices

struct SublatticeGap {
    double value = 0.0;
    double zeta = 0.0;   ///< sum of eps over the nonzero points of ell Z^n
    double k = 0.0;      ///< uniform bound between distinct sublattices
    int ell = 0;
    double bound_M = 0.0;
};

inline constexpr std::size_t max_sublattice_blocks = 4096;

/** Gap lower bound |||M|||^{-2} (1 - zeta)^2 for the dynamics on Z^n. */
inline SublatticeGap sublattice_gap(const LatticeKernel& kernel)
{
    SublatticeResult s = sublattice_k(kernel);
    SublatticeGap out;
    out.ell = s.ell;
    out.k = s.k;
    out.zeta = s.class_sums.empty() ? 0.0 : s.class_sums.front();
    require(out.zeta < 1.0, ErrorKind::no_valid_spacing, "no spacing with zeta < 1");
    std::size_t N = 1;
    for (int i = 0; i < kernel.n; ++i) N *= std::size_t(s.ell);
    require(N <= max_sublattice_blocks, ErrorKind::size_cap, "too many sublattices for the block matrix");
    Matrix eps = Matrix::Constant(Index(N), Index(N), s.k);
    eps.diagonal().setZero();
    if (N == 1)
        out.bound_M = 1.0;
    else
        out.bound_M = gap_lower_bounds(eps).bound_M;
    out.value = out.bound_M * sqr(1.0 - out.zeta);
    return out;
}

} // namespace rhomix
