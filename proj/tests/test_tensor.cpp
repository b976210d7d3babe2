#include <rhomix/discrete.hpp>
#include <rhomix/gaussian.hpp>
#include <rhomix/random.hpp>
#include <rhomix/tensor.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace rhomix;

namespace {

Matrix toeplitz(const std::vector<double>& eps, Index size)
{
    // eps[r] is the value at offset r - R.
    const Index R = Index(eps.size() / 2);
    Matrix T = Matrix::Zero(size, size);
    for (Index i = 0; i < size; ++i)
        for (Index j = 0; j < size; ++j)
            if (std::abs(j - i) <= R) T(i, j) = eps[std::size_t(j - i + R)];
    return T;
}

LatticeKernel exponential_kernel(int n, int R, double C, double psi, LatticeNorm norm, bool with_tail)
{
    LatticeKernel k = LatticeKernel::zeros(n, R);
    k.norm = norm;
    for (std::size_t i = 0; i < k.values.size(); ++i) k.values[i] = C * std::exp(-psi * lattice_norm(k.point(i), norm));
    if (with_tail) {
        k.tail = {TailModel::Kind::exponential, C, psi};
        k.complete = false;
    }
    return k;
}

} // namespace

TEST(SimpleBound, Values)
{
    EXPECT_NEAR(simple_bound({0.5, 0.5}), std::sqrt(7.0) / 4.0, 1e-15);
    EXPECT_EQ(simple_bound({}), 0.0);
    EXPECT_EQ(simple_bound({0.3, 1.0, 0.2}), 1.0);
    EXPECT_THROW(simple_bound({1.2}), Error);
}

TEST(NMBound, RowIsEuclideanNorm)
{
    Matrix row(1, 3);
    row << 0.3, 0.4, 0.1;
    EXPECT_NEAR(nm_bound(row), std::sqrt(0.26), 1e-12);
    row << 0.8, 0.7, 0.5;
    EXPECT_EQ(nm_bound(row), 1.0);
    EXPECT_NEAR(nm_norm(row), std::sqrt(1.38), 1e-12);
}

TEST(NMBound, ConstantMatrixIsRankOne)
{
    for (auto [n, m, e] : {std::tuple{2, 3, 0.1}, std::tuple{4, 4, 0.2}, std::tuple{3, 5, 0.05}}) {
        Matrix E = Matrix::Constant(n, m, e);
        EXPECT_NEAR(nm_bound(E), std::min(1.0, e * std::sqrt(double(n * m))), 1e-12);
    }
    EXPECT_EQ(nm_bound(Matrix::Zero(3, 2)), 0.0);
}

TEST(NMBound, NormSquaredIsPerronRootOfGram)
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 30; ++t) {
        Matrix E(3, 4);
        for (Index i = 0; i < 3; ++i)
            for (Index j = 0; j < 4; ++j) E(i, j) = u(rng);
        auto pf = pf_certificate(E * E.transpose());
        EXPECT_NEAR(pf.rho, std::pow(nm_norm(E), 2), 1e-9);
    }
}

TEST(ZZBound, Values)
{
    EXPECT_NEAR(zz_bound({0.0, 0.37, 0.0}), 0.37, 1e-15);
    EXPECT_EQ(zz_bound({0.9, 0.9}), 1.0);
    for (double a : {0.2, 1.0, 3.0}) {
        double e = (std::sqrt(1.0 + 4.0 * a) - 1.0) / (2.0 * std::sqrt(1.0 + 2.0 * a));
        EXPECT_NEAR(zz_bound({e, e}), 2.0 * e * std::sqrt(1.0 - e * e), 1e-14);
        EXPECT_NEAR(zz_bound({e, e}), 2.0 * a / (1.0 + 2.0 * a), 1e-12);
    }
}

TEST(ZZBound, DominatedByToeplitzNorm)
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.05, 0.4);
    for (int t = 0; t < 30; ++t) {
        std::vector<double> eps = {u(rng), u(rng), u(rng)};
        double zz = zz_bound(eps), nm = nm_bound(toeplitz(eps, 256));
        EXPECT_LE(zz, nm + 1e-12);
        if (zz < 1.0) {
            EXPECT_LT(zz, nm);
        }
    }
}

TEST(Bounds, MonotoneInEachEntry)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 0.6);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> e = {u(rng), u(rng), u(rng)};
        std::vector<double> f = e;
        f[std::size_t(t % 3)] += 0.3;
        EXPECT_LE(simple_bound(e), simple_bound(f));
        EXPECT_LE(zz_bound(e), zz_bound(f));
        Matrix E(1, 3), F(1, 3);
        for (Index i = 0; i < 3; ++i) E(0, i) = e[std::size_t(i)], F(0, i) = f[std::size_t(i)];
        EXPECT_LE(nm_bound(E), nm_bound(F) + 1e-15);
    }
}

TEST(Bounds, SoundOnRandomFiniteSystems)
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> us(0.2, 2.0);
    for (int t = 0; t < 40; ++t) {
        const int N = 1 + int(rng() % 2), M = 1 + int(rng() % 2);
        FiniteSystem sys = random_system(rng, N + M, 2, us(rng));
        std::vector<int> X(static_cast<std::size_t>(N)), Y(static_cast<std::size_t>(M));
        std::iota(X.begin(), X.end(), 0);
        std::iota(Y.begin(), Y.end(), N);
        Matrix E(N, M);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < M; ++j) {
                auto pool = complement_pool(sys, {i, N + j});
                E(i, j) = subjective_maxcorr(sys, i, N + j, pool);
            }
        double rho = maxcorr_blocks(sys, X, Y);
        EXPECT_LE(rho, nm_bound(E) + 1e-9);
        if (M == 1) {
            std::vector<double> col(E.data(), E.data() + N);
            EXPECT_LE(rho, simple_bound(col) + 1e-9);
        }
    }
}

TEST(ZnBound, OneDimensionMatchesZZ)
{
    LatticeKernel k = LatticeKernel::zeros(1, 3);
    std::vector<double> v = {0.01, 0.05, 0.2, 0.0, 0.2, 0.05, 0.01};
    k.values = v;
    EXPECT_NEAR(zn_bound(k).value, zz_bound(v), 1e-15);
    EXPECT_EQ(zn_bound(LatticeKernel::zeros(2, 2)).value, 0.0);
}

TEST(ZnBound, TailCertificateCoversLargerWindow)
{
    for (LatticeNorm norm : {LatticeNorm::l1, LatticeNorm::linf}) {
        auto small = zn_bound(exponential_kernel(2, 3, 0.02, 1.0, norm, true));
        double big = zn_bound(exponential_kernel(2, 40, 0.02, 1.0, norm, false)).value;
        EXPECT_LE(big, small.value + 1e-14);
        EXPECT_LE(small.value - big, small.tail_error + 1e-9);
        EXPECT_GE(small.tail_error, 0.0);
    }
}

TEST(ZnBound, IncompleteWindowNeedsTail)
{
    LatticeKernel k = LatticeKernel::zeros(1, 2);
    k.complete = false;
    EXPECT_THROW(zn_bound(k), Error);
}

TEST(DistanceBound, ClampsAtOne)
{
    LatticeKernel k = LatticeKernel::zeros(1, 3);
    for (double& v : k.values) v = 0.3;
    EXPECT_EQ(distance_bound(k, 0.0).value, 1.0);
}

TEST(DistanceBound, SingleShellSum)
{
    LatticeKernel k = LatticeKernel::zeros(2, 3);
    k.norm = LatticeNorm::l1;
    int shell = 0;
    for (std::size_t i = 0; i < k.values.size(); ++i)
        if (lattice_norm(k.point(i), k.norm) == 2.0) k.values[i] = 0.1, ++shell;
    EXPECT_EQ(shell, 8);
    EXPECT_NEAR(distance_bound(k, 0.0).value, 0.8, 1e-15);
    EXPECT_NEAR(distance_bound(k, 2.0).value, 0.8, 1e-15);
    EXPECT_EQ(distance_bound(k, 2.5).value, 0.0);
}

TEST(DistanceBound, ExponentialDecayRate)
{
    const double psi = 0.7;
    LatticeKernel k = exponential_kernel(2, 6, 0.05, psi, LatticeNorm::l1, true);
    double d1 = 30.0, d2 = 60.0;
    double slope = (std::log(distance_bound(k, d2).value) - std::log(distance_bound(k, d1).value)) / (d2 - d1);
    // The l1 shell at radius d has 4d points, so the slope is -psi plus a 1/d correction.
    EXPECT_LT(slope, -psi + 0.05);
    EXPECT_GT(slope, -psi - 0.01);
}

TEST(Sublattice, SmallSumUsesUnitSpacing)
{
    LatticeKernel k = LatticeKernel::zeros(1, 2);
    k.values = {0.1, 0.3, 0.0, 0.3, 0.1};
    auto r = sublattice_k(k);
    EXPECT_EQ(r.ell, 1);
    EXPECT_NEAR(r.k, 0.8, 1e-12);
    EXPECT_EQ(sublattice_k(LatticeKernel::zeros(2, 1)).k, 0.0);
}

TEST(Sublattice, NearestNeighbourAboveOne)
{
    LatticeKernel k = LatticeKernel::zeros(1, 1);
    k.values = {0.6, 0.0, 0.6};
    auto r = sublattice_k(k);
    EXPECT_LT(r.k, 1.0);
    EXPECT_GT(r.ell, 1);
    for (double s : r.class_sums) EXPECT_LT(s, 1.0);
}

TEST(Sublattice, BoundsDisjointBlocksOfASixSiteChain)
{
    // Binary spin chain; eps(z) is the largest measured subjective correlation at offset z.
    const int L = 6;
    const double J = 0.35;
    std::vector<Variable> vars(L, Variable{"s", 2});
    FiniteSystem sys = FiniteSystem::from_weights(vars, [&](const std::vector<int>& d) {
        double e = 0.0;
        for (int i = 0; i + 1 < L; ++i) e += (2 * d[std::size_t(i)] - 1) * (2 * d[std::size_t(i + 1)] - 1);
        return std::exp(J * e);
    });
    LatticeKernel k = LatticeKernel::zeros(1, L - 1);
    for (int i = 0; i < L; ++i)
        for (int j = i + 1; j < L; ++j) {
            double e = subjective_maxcorr(sys, i, j, complement_pool(sys, {i, j}));
            k.at({j - i}) = std::max(k.at({j - i}), e);
            k.at({i - j}) = k.at({j - i});
        }
    auto r = sublattice_k(k);
    ASSERT_LT(r.k, 1.0);
    EXPECT_LE(maxcorr_blocks(sys, {0, 2, 4}, {1, 3, 5}), r.k + 1e-12);
    EXPECT_LE(maxcorr_blocks(sys, {0, 1, 2}, {3, 4, 5}), r.k + 1e-12);
    EXPECT_LE(maxcorr_blocks(sys, {0, 5}, {2, 3}), r.k + 1e-12);
}

TEST(PerronFrobenius, Nilpotent)
{
    Matrix A(2, 2);
    A << 0, 1, 0, 0;
    auto pf = pf_certificate(A, 1e-3);
    EXPECT_NEAR(pf.rho, 0.0, 1e-12);
    EXPECT_LE(pf.certified, pf.rho + 1e-3 + 1e-15);
    EXPECT_TRUE((pf.u.array() > 0.0).all());
}

TEST(PerronFrobenius, Scalar)
{
    Matrix A(1, 1);
    A << 0.37;
    EXPECT_NEAR(pf_certificate(A).rho, 0.37, 1e-12);
}

TEST(PerronFrobenius, MatchesEigenSolver)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        Matrix A(3, 3);
        for (Index i = 0; i < 3; ++i)
            for (Index j = 0; j < 3; ++j) A(i, j) = (t % 4 == 0 && i > j) ? 0.0 : u(rng);
        Eigen::EigenSolver<Matrix> es(A);
        double want = es.eigenvalues().cwiseAbs().maxCoeff();
        auto pf = pf_certificate(A, 1e-6);
        EXPECT_NEAR(pf.rho, want, 1e-9);
        EXPECT_LE(pf.certified, pf.rho + 1e-6 + 1e-12);
        EXPECT_TRUE((pf.u.array() > 0.0).all());
    }
}

TEST(PerronFrobenius, RejectsNegativeEntries)
{
    Matrix A(2, 2);
    A << 0, -1, 1, 0;
    EXPECT_THROW(pf_certificate(A), Error);
}
