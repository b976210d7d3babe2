#include <rhomix/conv.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace rhomix;

namespace {

ToeplitzKernel line_kernel(int R, const std::function<double(int)>& f)
{
    ToeplitzKernel a = ToeplitzKernel::zeros(1, R);
    for (int z = -R; z <= R; ++z) a.ref({z}) = f(z);
    return a;
}

ToeplitzKernel scaled_to(ToeplitzKernel a, double norm)
{
    const double s = norm / a.l1();
    for (double& v : a.values) v *= s;
    return a;
}

// direct sum over both supports
double conv_at(const ToeplitzKernel& u, const ToeplitzKernel& v, const std::vector<int>& z)
{
    double s = 0.0;
    for (std::size_t i = 0; i < v.values.size(); ++i) {
        auto y = v.point(i);
        std::vector<int> x(z.size());
        for (std::size_t c = 0; c < z.size(); ++c) x[c] = z[c] - y[c];
        s += u.at(x) * v.values[i];
    }
    return s;
}

} // namespace

TEST(ConvInverse, OneSidedGeometric)
{
    ToeplitzKernel a = ToeplitzKernel::zeros(1, 1);
    a.ref({1}) = std::exp(-1.0);
    auto B = conv_inverse(a);
    for (int z = -B.b.R; z <= B.b.R; ++z) {
        double want = z > 0 ? std::exp(-double(z)) : 0.0;
        EXPECT_NEAR(B.b.at({z}), want, 1e-12) << z;
    }
    EXPECT_LT(B.truncation_l1, 1e-11);
}

TEST(ConvInverse, ZeroKernel)
{
    auto B = conv_inverse(ToeplitzKernel::zeros(2, 2));
    for (double v : B.b.values) EXPECT_EQ(v, 0.0);
}

TEST(ConvInverse, RandomKernelSatisfiesIdentity)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n : {1, 2}) {
        ToeplitzKernel a = ToeplitzKernel::zeros(n, 2);
        for (double& v : a.values) v = u(rng);
        a = scaled_to(a, 0.7);
        auto B = conv_inverse(a);
        EXPECT_LT(B.identity_residual, 1e-10);
        // (delta - a) * (delta + b) = delta, checked pointwise near the origin
        ToeplitzKernel probe = ToeplitzKernel::zeros(n, 3);
        for (std::size_t i = 0; i < probe.values.size(); ++i) {
            auto z = probe.point(i);
            bool origin = std::all_of(z.begin(), z.end(), [](int c) { return c == 0; });
            double lhs = (origin ? 1.0 : 0.0) + B.b.at(z) - a.at(z) - conv_at(B.b, a, z);
            EXPECT_NEAR(lhs, origin ? 1.0 : 0.0, 1e-10);
        }
        EXPECT_NEAR(1.0 + B.b.l1(), 1.0 / (1.0 - 0.7), 1e-9);
    }
}

TEST(ConvInverse, NormAtLeastOneRejected)
{
    ToeplitzKernel a = ToeplitzKernel::zeros(1, 1);
    a.ref({1}) = 0.5;
    a.ref({-1}) = 0.5;
    EXPECT_THROW(conv_inverse(a), Error);
    a.ref({-1}) = 0.45;
    a.tail_l1 = 0.06;
    EXPECT_THROW(conv_inverse(a), Error);
}

TEST(ConvInverse, AbsoluteKernelDominates)
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ToeplitzKernel a = ToeplitzKernel::zeros(1, 3);
    for (double& v : a.values) v = u(rng);
    a = scaled_to(a, 0.8);
    ToeplitzKernel abs_a = a;
    for (double& v : abs_a.values) v = std::abs(v);
    auto B = conv_inverse(a), Babs = conv_inverse(abs_a);
    for (std::size_t i = 0; i < B.b.values.size(); ++i)
        EXPECT_LE(std::abs(B.b.values[i]), Babs.b.at(B.b.point(i)) + 1e-12);
}

TEST(DecayFit, PureExponential)
{
    std::vector<double> p(40);
    for (std::size_t r = 0; r < p.size(); ++r) p[r] = std::exp(-double(r));
    auto f = decay_fit(p, 1e-14);
    EXPECT_EQ(f.cls, DecayClass::exponential);
    EXPECT_NEAR(f.rate, 1.0, 0.02);
}

TEST(DecayFit, PurePolynomial)
{
    std::vector<double> p(200);
    for (std::size_t r = 0; r < p.size(); ++r) p[r] = std::pow(1.0 + double(r), -3.0);
    auto f = decay_fit(p);
    EXPECT_EQ(f.cls, DecayClass::polynomial);
    EXPECT_NEAR(f.exponent, 3.0, 0.3);
}

TEST(DecayFit, NoiseIsInconclusive)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<double> p(30);
    for (double& v : p) v = u(rng);
    EXPECT_EQ(decay_fit(p).cls, DecayClass::inconclusive);
    EXPECT_THROW(decay_fit(std::vector<double>(11, 1.0)), Error);
}

TEST(DecayFit, InverseKeepsPolynomialExponent)
{
    auto a = scaled_to(line_kernel(300, [](int z) { return z == 0 ? 0.0 : std::pow(std::abs(double(z)), -3.0); }), 0.5);
    auto B = conv_inverse(a);
    auto profile = shell_profile(B.b);
    profile.resize(250);
    for (std::size_t r = 0; r < 10; ++r) profile[r] = 0.0;
    auto f = decay_fit(profile);
    EXPECT_EQ(f.cls, DecayClass::polynomial);
    EXPECT_NEAR(f.exponent, 3.0, 0.3);
}

TEST(DecayFit, InverseRateNeverFaster)
{
    for (double rate : {0.5, 1.0, 2.0}) {
        auto a = scaled_to(line_kernel(30, [&](int z) { return std::exp(-rate * std::abs(z)); }), 0.6);
        auto B = conv_inverse(a);
        auto fa = decay_fit(shell_profile(a), 1e-12);
        auto pb = shell_profile(B.b);
        pb.resize(30);
        auto fb = decay_fit(pb, 1e-12);
        EXPECT_EQ(fb.cls, DecayClass::exponential);
        EXPECT_LE(fb.rate, fa.rate + 1e-6) << rate;
    }
}

TEST(BandedInverse, ScalarMatrix)
{
    auto c = banded_inverse_constants(2.0, 2.0, 2.0, 1.0);
    EXPECT_GT(c.gamma_prime, 0.0);
    EXPECT_GE(c.A_prime, 0.5);
}

TEST(BandedInverse, RandomNearlyDiagonal)
{
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n = 50;
    const double gamma = 0.7;
    for (int trial = 0; trial < 5; ++trial) {
        Matrix M = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            M(i, i) = 2.0 + 0.5 * u(rng);
            for (int j = i + 1; j < n; ++j) M(i, j) = M(j, i) = 0.3 * u(rng) * std::exp(-gamma * (j - i));
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(M);
        const double r = es.eigenvalues().minCoeff(), R = es.eigenvalues().maxCoeff();
        double A = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) A = std::max(A, std::abs(M(i, j)) * std::exp(gamma * std::abs(i - j)));
        auto c = banded_inverse_constants(r, R, A, gamma);
        Matrix inv = M.inverse();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                EXPECT_LE(std::abs(inv(i, j)), c.A_prime * std::exp(-c.gamma_prime * std::abs(i - j)) + 1e-12);
    }
}

TEST(BandedInverse, TridiagonalClosedForm)
{
    const int n = 40;
    const double alpha = 2.0, beta = 0.5;
    Matrix M = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        M(i, i) = alpha;
        if (i + 1 < n) M(i, i + 1) = M(i + 1, i) = -beta;
    }
    // inverse of the Dirichlet tridiagonal Toeplitz matrix, 1-based
    const double th = std::acosh(alpha / (2 * beta));
    auto inv = [&](int i, int j) {
        if (i > j) std::swap(i, j);
        return std::sinh(i * th) * std::sinh((n + 1 - j) * th) / (beta * std::sinh(th) * std::sinh((n + 1) * th));
    };
    Matrix dense = M.inverse();
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) ASSERT_NEAR(dense(i - 1, j - 1), inv(i, j), 1e-12);

    const double gamma = 1.0, A = std::max(alpha, beta * std::exp(gamma));
    auto c = banded_inverse_constants(alpha - 2 * beta, alpha + 2 * beta, A, gamma);
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) EXPECT_LE(inv(i, j), c.A_prime * std::exp(-c.gamma_prime * std::abs(i - j)));
    // the true decay rate is th; the certified one is slower
    EXPECT_LE(c.gamma_prime, th);
}

TEST(BandedInverse, InvalidInput)
{
    EXPECT_THROW(banded_inverse_constants(0.0, 1.0, 1.0, 1.0), Error);
    EXPECT_THROW(banded_inverse_constants(2.0, 1.0, 1.0, 1.0), Error);
    EXPECT_THROW(banded_inverse_constants(1.0, 2.0, 1.0, 0.0), Error);
}

TEST(PhiSubinvariance, PolynomialKernelCertified)
{
    const double alpha = 3.0;
    auto a = scaled_to(line_kernel(20, [&](int z) { return z == 0 ? 0.0 : std::pow(std::abs(double(z)), -alpha); }), 0.5);
    auto res = phi_subinvariance(a, alpha, 60);
    ASSERT_TRUE(res.certified);
    EXPECT_LT(res.rho, 1.0);
    for (int z = -60; z <= 60; ++z) {
        double s = 0.0;
        for (int y = -20; y <= 20; ++y) s += a.at({y}) * std::pow(std::max(std::abs(double(z - y)), res.d), -alpha);
        EXPECT_LE(s, res.rho * std::pow(std::max(std::abs(double(z)), res.d), -alpha) * (1 + 1e-12)) << z;
    }
}

TEST(PhiSubinvariance, NeedsExponentAboveDimension)
{
    auto a = scaled_to(line_kernel(3, [](int z) { return z == 0 ? 0.0 : 1.0; }), 0.5);
    EXPECT_THROW(phi_subinvariance(a, 1.0, 10), Error);
}
