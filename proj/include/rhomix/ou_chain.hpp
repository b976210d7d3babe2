#pragma once

#include "core.hpp"
#include "gaussian.hpp"

#include <boost/numeric/odeint.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <limits>
#include <numeric>
#include <vector>

namespace rhomix {

/** @brief Damped harmonic chain with friction and heat bath on the momenta. */
struct OUChainParams {
    double m = 1.0;
    double omega = 1.0;
    double c = 1.0;
    double T = 1.0;
    double lambda = 1.0;
    double t = 1.0;
    int K = 16;
};

inline void validate(const OUChainParams& p)
{
    for (double v : {p.m, p.omega, p.c, p.T, p.lambda, p.t})
        require(std::isfinite(v) && v > 0.0, ErrorKind::invalid_input, "chain parameters must be strictly positive");
    require(p.K >= 3, ErrorKind::invalid_input, "chain needs K >= 3 particles");
}

/** Drift on (p_0..p_{K-1}, q_0..q_{K-1}) with periodic boundary. */
inline Matrix ou_drift(const OUChainParams& p)
{
    const Index K = p.K;
    Matrix A = Matrix::Zero(2 * K, 2 * K);
    for (Index i = 0; i < K; ++i) {
        A(i, i) = -p.lambda;
        A(i, K + i) = -p.m * (p.omega * p.omega + 2.0 * p.c * p.c);
        A(i, K + (i + 1) % K) += p.m * p.c * p.c;
        A(i, K + (i + K - 1) % K) += p.m * p.c * p.c;
        A(K + i, i) = 1.0 / p.m;
    }
    return A;
}

/** Energy quadratic form: H = x^T Q x / 2. */
inline Matrix ou_energy_form(const OUChainParams& p)
{
    const Index K = p.K;
    Matrix Q = Matrix::Zero(2 * K, 2 * K);
    for (Index i = 0; i < K; ++i) {
        Q(i, i) = 1.0 / p.m;
        Q(K + i, K + i) = p.m * (p.omega * p.omega + 2.0 * p.c * p.c);
        Q(K + i, K + (i + 1) % K) += -p.m * p.c * p.c;
        Q(K + i, K + (i + K - 1) % K) += -p.m * p.c * p.c;
    }
    return Q;
}

inline Matrix ou_noise(const OUChainParams& p)
{
    const Index K = p.K;
    Matrix D = Matrix::Zero(2 * K, 2 * K);
    D.topLeftCorner(K, K).diagonal().setConstant(2.0 * p.T * p.lambda * p.m);
    return D;
}

/** Noise covariance accumulated over [0, t]: solves dS/du = A S + S A^T + D, S(0) = 0. */
inline Matrix ou_accumulated_noise(const OUChainParams& p, double t, double rtol = 1e-10, double atol = 1e-22)
{
    validate(p);
    const Matrix A = ou_drift(p);
    const Matrix D = ou_noise(p);
    const Index n = A.rows();
    using State = std::vector<double>;
    State x(std::size_t(n * n), 0.0);
    auto rhs = [&](const State& s, State& ds, double) {
        Eigen::Map<const Matrix> S(s.data(), n, n);
        Eigen::Map<Matrix> dS(ds.data(), n, n);
        Matrix AS = A * S;
        dS = AS + AS.transpose() + D;
    };
    namespace ode = boost::numeric::odeint;
    try {
        auto stepper = ode::make_controlled(atol, rtol, ode::runge_kutta_dopri5<State>());
        ode::integrate_adaptive(stepper, rhs, x, 0.0, t, std::min(t, 1e-3) * 1e-2);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::integrator, std::string("noise covariance integration failed: ") + e.what());
    }
    Matrix S = Eigen::Map<const Matrix>(x.data(), n, n);
    require(S.allFinite(), ErrorKind::integrator, "noise covariance integration produced non-finite values");
    return 0.5 * (S + S.transpose());
}

struct OUChainReport {
    Matrix drift;
    Matrix stationary;       ///< T Q^{-1}
    Matrix accumulated;      ///< noise covariance over [0, t]
    Matrix propagator;       ///< exp(t A)
    GaussianSystem joint;    ///< (eta, eta') with eta' the state after time t
    double maxcorr = 0.0;
    Matrix coordinate_corr;  ///< Corr(eta_a, eta'_b)
    double lyapunov_residual = 0.0;
    double consistency_residual = 0.0;  ///< |Phi S Phi^T + C_hat - S| relative
    double precision_min = 0.0;  ///< r: smallest eigenvalue of the rescaled joint precision
    double precision_max = 0.0;  ///< R: largest eigenvalue
};

inline OUChainReport ou_chain_joint(const OUChainParams& p)
{
    validate(p);
    OUChainReport r;
    const Index K = p.K, n = 2 * K;
    r.drift = ou_drift(p);
    r.stationary = p.T * ou_energy_form(p).inverse();
    r.stationary = 0.5 * (r.stationary + r.stationary.transpose());
    Matrix D = ou_noise(p);
    r.lyapunov_residual =
        (r.drift * r.stationary + r.stationary * r.drift.transpose() + D).cwiseAbs().maxCoeff() / D.maxCoeff();
    r.accumulated = ou_accumulated_noise(p, p.t);
    r.propagator = (p.t * r.drift).exp();
    const Matrix& S = r.stationary;
    Matrix cross = r.propagator * S;  // Cov(eta', eta)
    r.consistency_residual = (r.propagator * S * r.propagator.transpose() + r.accumulated - S).cwiseAbs().maxCoeff() /
                             S.cwiseAbs().maxCoeff();
    Matrix C(2 * n, 2 * n);
    C.topLeftCorner(n, n) = S;
    C.topRightCorner(n, n) = cross.transpose();
    C.bottomLeftCorner(n, n) = cross;
    C.bottomRightCorner(n, n) = S;
    std::vector<std::string> labels;
    for (const char* tag : {"", "'"}) {
        for (Index i = 0; i < K; ++i) labels.push_back("p" + std::to_string(i) + tag);
        for (Index i = 0; i < K; ++i) labels.push_back("q" + std::to_string(i) + tag);
    }
    r.joint = GaussianSystem{labels, 0.5 * (C + C.transpose())};
    std::vector<Index> I(static_cast<std::size_t>(n)), J(static_cast<std::size_t>(n));
    std::iota(I.begin(), I.end(), Index(0));
    std::iota(J.begin(), J.end(), n);
    r.maxcorr = maxcorr_gaussian(r.joint, I, J);

    r.coordinate_corr = Matrix(n, n);
    for (Index a = 0; a < n; ++a)
        for (Index b = 0; b < n; ++b) r.coordinate_corr(a, b) = cross(b, a) / std::sqrt(S(a, a) * S(b, b));

    Vector scale = Vector::Ones(2 * n);
    const double chi = p.m * p.omega;
    for (Index i = 0; i < K; ++i) {
        scale(i) = 1.0 / chi;
        scale(n + i) = 1.0 / chi;
    }
    Matrix Cs = scale.asDiagonal() * r.joint.cov * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> es(Cs, Eigen::EigenvaluesOnly);
    // precision eigenvalues are reciprocals of covariance eigenvalues
    r.precision_min = 1.0 / es.eigenvalues().maxCoeff();
    r.precision_max = es.eigenvalues().minCoeff() > 0.0 ? 1.0 / es.eigenvalues().minCoeff()
                                                        : std::numeric_limits<double>::infinity();
    return r;
}

struct SmallTimeReport {
    double c_pp = 0.0, c_pq = 0.0, c_qq = 0.0;                ///< extrapolated leading coefficients
    double expected_pp = 0.0, expected_pq = 0.0, expected_qq = 0.0;
    std::vector<double> pp_slopes;  ///< log-log slope of |C_{p_0 p_d}| in t, d = 0..max_d
};

namespace detail {

/** Polynomial extrapolation to h = 0 from samples at h, h/2, h/4, ... */
inline double extrapolate_to_zero(const std::vector<double>& h, std::vector<double> g)
{
    const std::size_t n = g.size();
    for (std::size_t k = 1; k < n; ++k)
        for (std::size_t i = n - 1; i >= k; --i) {
            g[i] = g[i] + (g[i] - g[i - 1]) * h[i] / (h[i - k] - h[i]);
            if (i == k) break;
        }
    return g[n - 1];
}

} // namespace detail

/** Leading small-time behaviour of the accumulated noise, by Richardson extrapolation. */
inline SmallTimeReport ou_small_time(const OUChainParams& p, double t0 = 0.02, int levels = 4, int max_d = 3)
{
    validate(p);
    const Index K = p.K;
    SmallTimeReport r;
    r.expected_pp = 2.0 * p.T * p.lambda * p.m;
    r.expected_pq = p.T * p.lambda;
    r.expected_qq = 2.0 / 3.0 * p.T * p.lambda / p.m;
    std::vector<double> h, gpp, gpq, gqq;
    std::vector<Matrix> samples;
    for (int l = 0; l < levels; ++l) {
        double t = t0 / double(1 << l);
        Matrix C = ou_accumulated_noise(p, t);
        samples.push_back(C);
        h.push_back(t);
        gpp.push_back(C(0, 0) / t);
        gpq.push_back(C(0, K) / (t * t));
        gqq.push_back(C(K, K) / (t * t * t));
    }
    r.c_pp = detail::extrapolate_to_zero(h, gpp);
    r.c_pq = detail::extrapolate_to_zero(h, gpq);
    r.c_qq = detail::extrapolate_to_zero(h, gqq);
    const Matrix& a = samples[std::size_t(levels - 2)];
    const Matrix& b = samples[std::size_t(levels - 1)];
    for (int d = 0; d <= max_d && d < K / 2; ++d) {
        double va = std::abs(a(0, d)), vb = std::abs(b(0, d));
        r.pp_slopes.push_back(std::log(va / vb) / std::log(h[std::size_t(levels - 2)] / h[std::size_t(levels - 1)]));
    }
    return r;
}

} // namespace rhomix
