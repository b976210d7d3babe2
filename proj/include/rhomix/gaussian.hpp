#pragma once

#include "core.hpp"
#include "linalg.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <string>
#include <vector>

namespace rhomix {

/** @brief Centred Gaussian vector described by its covariance. */
struct GaussianSystem {
    std::vector<std::string> labels;
    Matrix cov;

    Index dim() const { return cov.rows(); }

    Index index_of(const std::string& label) const
    {
        auto it = std::find(labels.begin(), labels.end(), label);
        require(it != labels.end(), ErrorKind::invalid_input, "unknown label " + label);
        return Index(it - labels.begin());
    }
};

inline void validate(const GaussianSystem& g)
{
    const Index n = g.cov.rows();
    require(g.cov.cols() == n, ErrorKind::invalid_input, "covariance must be square");
    require(g.labels.empty() || Index(g.labels.size()) == n, ErrorKind::invalid_input, "label count mismatch");
    if (n == 0) return;
    require(g.cov.allFinite(), ErrorKind::invalid_input, "covariance must be finite");
    double scale = std::max(g.cov.cwiseAbs().maxCoeff(), 1e-300);
    require((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff() <= tol::symmetric * scale, ErrorKind::invalid_input,
            "covariance must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(g.cov, Eigen::EigenvaluesOnly);
    double nrm = es.eigenvalues().cwiseAbs().maxCoeff();
    require(es.eigenvalues().minCoeff() >= -tol::psd * nrm, ErrorKind::invalid_input,
            "covariance must be positive semidefinite");
}

inline GaussianSystem make_gaussian(const Matrix& cov, std::vector<std::string> labels = {})
{
    if (labels.empty())
        for (Index i = 0; i < cov.rows(); ++i) labels.push_back("v" + std::to_string(i));
    GaussianSystem g{std::move(labels), 0.5 * (cov + cov.transpose())};
    validate(g);
    return g;
}

/** Covariance of A xi where xi is standard normal; rows of A are the variables. */
inline GaussianSystem gaussian_from_loadings(const Matrix& A, std::vector<std::string> labels = {})
{
    return make_gaussian(A * A.transpose(), std::move(labels));
}

namespace detail {

inline void check_indices(const GaussianSystem& g, const std::vector<Index>& idx, const char* name, bool allow_empty)
{
    require(allow_empty || !idx.empty(), ErrorKind::invalid_input, std::string(name) + " must be non-empty");
    for (Index i : idx) require(i >= 0 && i < g.dim(), ErrorKind::invalid_input, std::string(name) + " index out of range");
    std::vector<Index> s = idx;
    std::sort(s.begin(), s.end());
    require(std::adjacent_find(s.begin(), s.end()) == s.end(), ErrorKind::invalid_input,
            std::string(name) + " has repeated indices");
}

inline bool overlaps(const std::vector<Index>& a, const std::vector<Index>& b)
{
    for (Index x : a)
        if (std::find(b.begin(), b.end(), x) != b.end()) return true;
    return false;
}

inline double maxcorr_cov(const Matrix& S, const std::vector<Index>& I, const std::vector<Index>& J)
{
    Matrix WI = whitening(submatrix(S, I, I));
    Matrix WJ = whitening(submatrix(S, J, J));
    if (WI.rows() == 0 || WJ.rows() == 0) return 0.0;
    Matrix C = WI * submatrix(S, I, J) * WJ.transpose();
    return clamp01(spectral_norm(C));
}

inline Matrix condition_cov(const Matrix& S, const std::vector<Index>& keep, const std::vector<Index>& K)
{
    Matrix Saa = submatrix(S, keep, keep);
    if (K.empty()) return Saa;
    double nrm = std::max(S.cwiseAbs().maxCoeff(), 1e-300);
    Matrix Skk = submatrix(S, K, K);
    // pseudo-inverse cutoff relative to the whole covariance scale
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Skk + Skk.transpose()));
    Matrix pinv = Matrix::Zero(Skk.rows(), Skk.cols());
    for (Index i = 0; i < Skk.rows(); ++i) {
        double ev = es.eigenvalues()(i);
        if (ev > tol::rank_cutoff * nrm)
            pinv += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose() / ev;
    }
    Matrix Sak = submatrix(S, keep, K);
    Matrix out = Saa - Sak * pinv * Sak.transpose();
    return 0.5 * (out + out.transpose());
}

} // namespace detail

/** Maximal correlation between two blocks: top singular value of the whitened cross-covariance. */
inline double maxcorr_gaussian(const GaussianSystem& g, const std::vector<Index>& I, const std::vector<Index>& J)
{
    detail::check_indices(g, I, "I", false);
    detail::check_indices(g, J, "J", false);
    require(!detail::overlaps(I, J), ErrorKind::overlap, "I and J must be disjoint");
    return detail::maxcorr_cov(g.cov, I, J);
}

/** Conditional law given the variables in K (Schur complement; values are irrelevant). */
inline GaussianSystem condition(const GaussianSystem& g, const std::vector<Index>& K)
{
    detail::check_indices(g, K, "K", true);
    std::vector<Index> keep;
    for (Index i = 0; i < g.dim(); ++i)
        if (std::find(K.begin(), K.end(), i) == K.end()) keep.push_back(i);
    GaussianSystem out;
    for (Index i : keep) out.labels.push_back(g.labels.empty() ? "v" + std::to_string(i) : g.labels[std::size_t(i)]);
    out.cov = detail::condition_cov(g.cov, keep, K);
    return out;
}

/** Maximal correlation of I and J under the law conditioned on K. */
inline double conditional_maxcorr(const GaussianSystem& g, const std::vector<Index>& I, const std::vector<Index>& J,
                                  const std::vector<Index>& K)
{
    detail::check_indices(g, I, "I", false);
    detail::check_indices(g, J, "J", false);
    detail::check_indices(g, K, "K", true);
    require(!detail::overlaps(I, J) && !detail::overlaps(I, K) && !detail::overlaps(J, K), ErrorKind::overlap,
            "I, J and K must be disjoint");
    std::vector<Index> keep = I;
    keep.insert(keep.end(), J.begin(), J.end());
    Matrix S = detail::condition_cov(g.cov, keep, K);
    std::vector<Index> ii(I.size()), jj(J.size());
    std::iota(ii.begin(), ii.end(), Index(0));
    std::iota(jj.begin(), jj.end(), Index(I.size()));
    return detail::maxcorr_cov(S, ii, jj);
}

struct ChainedReport {
    std::vector<double> e;  ///< e_i = maxcorr(X_i; Y | X_{<i})
    double chained = 0.0;   ///< sqrt(1 - prod(1 - e_i^2))
    double direct = 0.0;    ///< maxcorr(X; Y)
    double row_norm = 0.0;  ///< sqrt(sum e_i^2)
};

/** Sequential conditional correlations of X_1..X_N against a scalar Y. */
inline ChainedReport chained_maxcorr(const GaussianSystem& g, const std::vector<Index>& X, Index y)
{
    detail::check_indices(g, X, "X", false);
    detail::check_indices(g, {y}, "Y", false);
    require(!detail::overlaps(X, {y}), ErrorKind::overlap, "Y must not be among the X variables");
    ChainedReport out;
    double prod = 1.0, sq = 0.0;
    std::vector<Index> prefix;
    for (Index x : X) {
        double e = conditional_maxcorr(g, {x}, {y}, prefix);
        out.e.push_back(e);
        prod *= 1.0 - e * e;
        sq += e * e;
        prefix.push_back(x);
    }
    out.chained = std::sqrt(std::max(0.0, 1.0 - prod));
    out.row_norm = std::sqrt(sq);
    out.direct = maxcorr_gaussian(g, X, {y});
    return out;
}

/**
 * Variance decomposition table of f = c . X along the filtrations of the X's and Y's.
 * Row j (j = 0..M) is taken under the law conditioned on Y_1..Y_j; entry i is
 * Var E[f | X_{<=i}] - Var E[f | X_{<i}].
 */
inline Matrix variance_table(const GaussianSystem& g, const std::vector<Index>& X, const std::vector<Index>& Y,
                             const Vector& c)
{
    detail::check_indices(g, X, "X", false);
    detail::check_indices(g, Y, "Y", true);
    require(!detail::overlaps(X, Y), ErrorKind::overlap, "X and Y must be disjoint");
    require(c.size() == Index(X.size()), ErrorKind::invalid_input, "one coefficient per X variable");
    const Index N = Index(X.size());
    Matrix out(Index(Y.size()) + 1, N);
    for (Index j = 0; j <= Index(Y.size()); ++j) {
        std::vector<Index> K(Y.begin(), Y.begin() + j);
        Matrix S = detail::condition_cov(g.cov, X, K);
        Vector b = S * c;
        double prev = 0.0;
        for (Index i = 1; i <= N; ++i) {
            Matrix Sii = S.topLeftCorner(i, i);
            Vector bi = b.head(i);
            double v = bi.dot(pinv_symmetric(Sii) * bi);
            out(j, i - 1) = v - prev;
            prev = v;
        }
    }
    return out;
}

inline Matrix variance_table(const GaussianSystem& g, const std::vector<Index>& X, const std::vector<Index>& Y)
{
    return variance_table(g, X, Y, Vector::Ones(Index(X.size())));
}

// ---------------------------------------------------------------------------
// Optimality constructions

struct OptimalSimple {
    GaussianSystem system;  ///< X_1..X_N then Y
    std::vector<double> alpha;
};

namespace detail {

inline Matrix optimal_simple_cov(const std::vector<double>& alpha)
{
    const Index N = Index(alpha.size());
    Matrix S = Matrix::Identity(N + 1, N + 1);
    for (Index i = 0; i < N; ++i) {
        for (Index j = 0; j < N; ++j)
            if (i != j) S(i, j) = std::sqrt(alpha[std::size_t(i)] * alpha[std::size_t(j)]);
        S(i, N) = S(N, i) = std::sqrt(alpha[std::size_t(i)]);
    }
    return S;
}

} // namespace detail

/**
 * X_i = sqrt(1 - a_i) zeta_i + sqrt(a_i) xi, Y = xi, with a_i solved in turn so that
 * maxcorr(X_i; Y | X_{<i}) = eps_i.
 */
inline OptimalSimple build_optimal_simple(const std::vector<double>& eps)
{
    for (double e : eps) require(e >= 0.0 && e < 1.0, ErrorKind::invalid_input, "epsilons must lie in [0,1)");
    std::vector<double> alpha;
    const Index n = Index(eps.size());
    for (Index i = 0; i < n; ++i) {
        auto e_of = [&](double a) {
            std::vector<double> trial = alpha;
            trial.push_back(a);
            Matrix S = detail::optimal_simple_cov(trial);
            std::vector<Index> prefix(std::size_t(i), 0);
            std::iota(prefix.begin(), prefix.end(), Index(0));
            Matrix C = detail::condition_cov(S, {i, i + 1}, prefix);
            double den = std::sqrt(C(0, 0) * C(1, 1));
            return den > 0.0 ? std::abs(C(0, 1)) / den : 0.0;
        };
        double target = eps[std::size_t(i)];
        double lo = 0.0, hi = 1.0;
        while (hi - lo > 1e-12) {
            double mid = 0.5 * (lo + hi);
            (e_of(mid) < target ? lo : hi) = mid;
        }
        alpha.push_back(target == 0.0 ? 0.0 : 0.5 * (lo + hi));
    }
    std::vector<std::string> labels;
    for (Index i = 0; i < n; ++i) labels.push_back("X" + std::to_string(i + 1));
    labels.push_back("Y");
    return {GaussianSystem{labels, detail::optimal_simple_cov(alpha)}, alpha};
}

struct BandedZZ {
    GaussianSystem system;  ///< X_{-k..k} then Y_{-k+1/2..k-1/2}
    std::vector<Index> x;
    std::vector<Index> y;
    double e_half_formula = 0.0;
    double e_half_window = 0.0;  ///< maxcorr(X_0; Y_{1/2} | X_{<0}, Y_{<1/2}) on the window
    double maxcorr = 0.0;        ///< maxcorr(X; Y) on the window
    double limit = 0.0;          ///< 2a / (1 + 2a)
    double block_sum_lower = 0.0;  ///< (2k-1) a / (k (1 + 2a)) from block sums
};

/**
 * X_i = zeta_i + sqrt(a)(w_{i-1/4} + w_{i+1/4}) for integer i, Y_j likewise for
 * half-integer j; truncated to |i| <= k, |j| <= k - 1/2.
 */
inline BandedZZ build_banded_zz(double alpha, int k)
{
    require(alpha >= 0.0 && std::isfinite(alpha), ErrorKind::invalid_input, "alpha must be >= 0");
    require(k >= 2, ErrorKind::invalid_input, "window k must be >= 2");
    BandedZZ out;
    const Index nx = 2 * k + 1, ny = 2 * k;
    Matrix S = Matrix::Zero(nx + ny, nx + ny);
    std::vector<std::string> labels;
    // positions doubled: X_i at 2i, Y_j at 2j
    std::vector<int> pos;
    for (int i = -k; i <= k; ++i) {
        pos.push_back(2 * i);
        labels.push_back("X" + std::to_string(i));
    }
    for (int j = -k; j < k; ++j) {
        pos.push_back(2 * j + 1);
        labels.push_back("Y" + std::to_string(j) + ".5");
    }
    for (Index a = 0; a < nx + ny; ++a) {
        S(a, a) = 1.0 + 2.0 * alpha;
        for (Index b = 0; b < nx + ny; ++b)
            if (a != b && std::abs(pos[std::size_t(a)] - pos[std::size_t(b)]) == 1) S(a, b) = alpha;
    }
    out.system = GaussianSystem{labels, S};
    for (Index a = 0; a < nx; ++a) out.x.push_back(a);
    for (Index b = 0; b < ny; ++b) out.y.push_back(nx + b);

    out.e_half_formula = (std::sqrt(1.0 + 4.0 * alpha) - 1.0) / (2.0 * std::sqrt(1.0 + 2.0 * alpha));
    Index x0 = k;           // X_0
    Index yh = nx + k;      // Y_{1/2}
    std::vector<Index> left;
    for (Index a = 0; a < x0; ++a) left.push_back(a);
    for (Index b = nx; b < yh; ++b) left.push_back(b);
    out.e_half_window = conditional_maxcorr(out.system, {x0}, {yh}, left);
    out.maxcorr = maxcorr_gaussian(out.system, out.x, out.y);
    out.limit = 2.0 * alpha / (1.0 + 2.0 * alpha);
    out.block_sum_lower = double(2 * k - 1) * alpha / (double(k) * (1.0 + 2.0 * alpha));
    return out;
}

// ---------------------------------------------------------------------------
// Three lines in R^3

struct ThreeLinesReport {
    double A = 0, B = 0, Omega = 0;           ///< angles (L2,L3), (L3,L1), (L1,L2)
    double A_app = 0, B_app = 0, Omega_app = 0;  ///< apparent angles seen from L1, L2, L3
    std::array<double, 3> sine_ratios{};
    bool order_consistent = true;
};

inline double line_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b)
{
    return std::atan2(a.cross(b).norm(), std::abs(a.dot(b)));
}

inline ThreeLinesReport three_lines(const Eigen::Vector3d& u1, const Eigen::Vector3d& u2, const Eigen::Vector3d& u3)
{
    const Eigen::Vector3d* u[3] = {&u1, &u2, &u3};
    for (auto* v : u) require(v->norm() > 0.0 && v->allFinite(), ErrorKind::invalid_input, "direction vectors must be nonzero");
    auto collinear = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
        return a.cross(b).norm() <= 1e-12 * a.norm() * b.norm();
    };
    require(!collinear(u1, u2) && !collinear(u2, u3) && !collinear(u3, u1), ErrorKind::collinear,
            "lines must be pairwise distinct");
    auto project = [](const Eigen::Vector3d& v, const Eigen::Vector3d& axis) {
        Eigen::Vector3d n = axis.normalized();
        return Eigen::Vector3d(v - v.dot(n) * n);
    };
    ThreeLinesReport r;
    r.A = line_angle(u2, u3);
    r.B = line_angle(u3, u1);
    r.Omega = line_angle(u1, u2);
    r.A_app = line_angle(project(u2, u1), project(u3, u1));
    r.B_app = line_angle(project(u3, u2), project(u1, u2));
    r.Omega_app = line_angle(project(u1, u3), project(u2, u3));
    r.sine_ratios = {std::sin(r.A_app) / std::sin(r.A), std::sin(r.B_app) / std::sin(r.B),
                     std::sin(r.Omega_app) / std::sin(r.Omega)};
    auto sgn = [](double app, double tru) { return app < tru ? -1 : (app > tru ? 1 : 0); };
    int a = sgn(r.A_app, r.A), b = sgn(r.B_app, r.B), o = sgn(r.Omega_app, r.Omega);
    r.order_consistent = (a == b && b == o);
    return r;
}

/**
 * Unit vectors whose pairwise line angles are (A, B, Omega) = (L2L3, L3L1, L1L2), in radians.
 * The sign of the triple product of cosines is chosen to make the Gram matrix PSD.
 */
inline std::array<Eigen::Vector3d, 3> lines_from_angles(double A, double B, double Omega)
{
    double ca = std::cos(A), cb = std::cos(B), co = std::cos(Omega);
    for (double sgn : {1.0, -1.0}) {
        Eigen::Matrix3d G;
        G << 1, co, cb, co, 1, sgn * ca, cb, sgn * ca, 1;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(G);
        if (es.eigenvalues().minCoeff() < -1e-14) continue;
        Eigen::Vector3d ev = es.eigenvalues().cwiseMax(0.0);
        Eigen::Matrix3d F = es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
        return {Eigen::Vector3d(F.row(0).transpose()), Eigen::Vector3d(F.row(1).transpose()),
                Eigen::Vector3d(F.row(2).transpose())};
    }
    throw Error(ErrorKind::invalid_input, "no three lines realise these angles");
}

} // namespace rhomix
