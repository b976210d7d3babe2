#pragma once

#include "core.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>

namespace rhomix {

struct SingularTriple {
    double sigma = 0.0;
    Vector u;
    Vector v;
};

namespace detail {

inline SingularTriple top_singular_power(const Matrix& A)
{
    SingularTriple out;
    const Index n = A.cols();
    Vector v = Vector::Ones(n) / std::sqrt(double(n));
    // perturb off any symmetric null direction
    for (Index i = 0; i < n; ++i) v(i) += 1e-3 * double((i * 7919) % 13) / 13.0;
    v.normalize();
    double prev = 0.0;
    for (int it = 0; it < 100000; ++it) {
        Vector w = A.transpose() * (A * v);
        double nrm = w.norm();
        if (nrm == 0.0) break;
        v = w / nrm;
        double s = std::sqrt(nrm);
        if (std::abs(s - prev) <= tol::power_iteration * std::max(s, 1e-300) && it > 5) {
            prev = s;
            break;
        }
        prev = s;
    }
    Vector u = A * v;
    out.sigma = u.norm();
    out.u = out.sigma > 0 ? Vector(u / out.sigma) : Vector::Zero(A.rows());
    out.v = v;
    return out;
}

} // namespace detail

/** Largest singular value with left/right singular vectors. */
inline SingularTriple top_singular(const Matrix& A)
{
    SingularTriple out;
    if (A.size() == 0) {
        out.u = Vector::Zero(A.rows());
        out.v = Vector::Zero(A.cols());
        return out;
    }
    if (std::max(A.rows(), A.cols()) > 200) return detail::top_singular_power(A);
    Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.sigma = svd.singularValues()(0);
    out.u = svd.matrixU().col(0);
    out.v = svd.matrixV().col(0);
    return out;
}

inline double spectral_norm(const Matrix& A) { return top_singular(A).sigma; }

/**
 * Whitening map of a PSD matrix restricted to its numerical range.
 * Returns W (r x n) with W S W^T = I_r; eigenvalues below cutoff * max are dropped.
 */
inline Matrix whitening(const Matrix& S, double cutoff = tol::rank_cutoff)
{
    const Index n = S.rows();
    if (n == 0) return Matrix(0, 0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
    const Vector& ev = es.eigenvalues();
    double top = std::max(ev.cwiseAbs().maxCoeff(), 0.0);
    std::vector<Index> keep;
    for (Index i = 0; i < n; ++i)
        if (ev(i) > cutoff * top && ev(i) > 0.0) keep.push_back(i);
    Matrix W(Index(keep.size()), n);
    for (std::size_t k = 0; k < keep.size(); ++k)
        W.row(Index(k)) = es.eigenvectors().col(keep[k]).transpose() / std::sqrt(ev(keep[k]));
    return W;
}

/** Pseudo-inverse of a symmetric matrix with relative eigenvalue cutoff. */
inline Matrix pinv_symmetric(const Matrix& S, double cutoff = tol::rank_cutoff)
{
    Matrix W = whitening(S, cutoff);
    return W.transpose() * W;
}

inline Index numerical_rank(const Matrix& A, double cutoff = 1e-10)
{
    if (A.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(A);
    const Vector& s = svd.singularValues();
    Index r = 0;
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > cutoff * std::max(s(0), 1e-300)) ++r;
    return r;
}

inline Matrix submatrix(const Matrix& S, const std::vector<Index>& rows, const std::vector<Index>& cols)
{
    Matrix out(Index(rows.size()), Index(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) out(Index(i), Index(j)) = S(rows[i], cols[j]);
    return out;
}

} // namespace rhomix
