#include <rhomix/conv.hpp>
#include <rhomix/lattice.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace rhomix;

namespace {

const std::vector<int> origin1 = {0};

// symmetric 1D couplings gamma(z) = g(|z|) for 1 <= |z| <= R
QuadraticModel ring_quadratic(int R, const std::function<double(int)>& g)
{
    QuadraticModel m;
    m.gamma = ToeplitzKernel::zeros(1, R);
    for (int z = 1; z <= R; ++z) m.gamma.ref({z}) = m.gamma.ref({-z}) = g(z);
    return m;
}

// dense precision of the quadratic model on a ring of L sites
Matrix ring_precision(const QuadraticModel& m, int L)
{
    Matrix Q = Matrix::Zero(L, L);
    for (int i = 0; i < L; ++i) {
        Q(i, i) += 1.0;
        for (int z = -m.gamma.R; z <= m.gamma.R; ++z) {
            if (z == 0) continue;
            double g = m.gamma.at({z});
            int j = ((i + z) % L + L) % L;
            Q(i, i) += g;
            Q(i, j) -= g;
        }
    }
    return Q;
}

// E[w_0 w_d] on a ring of L sites by enumeration
double ring_spin_corr(const FiniteSystem& sys, std::size_t d)
{
    double s = 0.0;
    for (std::size_t x = 0; x < sys.num_states(); ++x)
        s += sys.prob(x) * spin_of(sys.digit(x, 0)) * spin_of(sys.digit(x, d));
    return s;
}

std::vector<double> prefix(std::vector<double> v, std::size_t n)
{
    v.resize(std::min(v.size(), n));
    return v;
}

} // namespace

TEST(QuadraticCovariance, MassAndDiagonal)
{
    for (double g : {0.05, 0.2, 0.45}) {
        auto m = nearest_neighbour_quadratic(2, g);
        auto c = quadratic_covariance(m);
        EXPECT_NEAR(c.total, 1.0, 1e-10);
        EXPECT_GE(c.a_inv.at({0, 0}), 1.0 / (1.0 + m.Gamma()) - 1e-15);
        for (double v : c.a_inv.values) EXPECT_GE(v, -1e-15);
    }
}

TEST(QuadraticCovariance, NoCouplingIsDelta)
{
    QuadraticModel m;
    m.gamma = ToeplitzKernel::zeros(1, 2);
    auto c = quadratic_covariance(m);
    EXPECT_NEAR(c.a_inv.at(origin1), 1.0, 1e-15);
    for (double v : c.eps.values) EXPECT_EQ(v, 0.0);
}

TEST(QuadraticCovariance, MatchesDenseInverse)
{
    auto m = ring_quadratic(3, [](int z) { return 0.3 * std::exp(-double(z)); });
    m.beta = 2.0;
    auto c = quadratic_covariance(m);
    const int L = 256;
    Matrix cov = ring_precision(m, L).inverse() / m.beta;
    for (int z = 0; z <= 20; ++z) EXPECT_NEAR(c.a_inv.at({z}) / m.beta, cov(0, z), 1e-11) << z;
}

TEST(QuadraticRho, NearestNeighbourGamma)
{
    auto m = nearest_neighbour_quadratic(1, 0.2);
    auto r = quadratic_rho_report(m);
    EXPECT_NEAR(r.Gamma, 0.4, 1e-15);
    EXPECT_LE(r.eps_sum, 0.4 + 1e-12);
    EXPECT_GT(r.eps_sum, 0.0);
    EXPECT_TRUE(r.gamma_bound_applies);
    for (std::size_t i = 1; i < r.distance_bounds.size(); ++i)
        EXPECT_LE(r.distance_bounds[i].second, r.distance_bounds[i - 1].second + 1e-15);
}

TEST(QuadraticRho, ZeroCouplingGivesZeroBounds)
{
    QuadraticModel m;
    m.gamma = ToeplitzKernel::zeros(2, 1);
    auto r = quadratic_rho_report(m);
    EXPECT_EQ(r.eps_sum, 0.0);
    for (const auto& [d, b] : r.distance_bounds) EXPECT_EQ(b, 0.0) << d;
    EXPECT_EQ(r.sublattice.k, 0.0);
}

TEST(QuadraticRho, ExponentialCouplingsGiveExponentialCorrelations)
{
    const double rate = 0.8;
    auto m = ring_quadratic(40, [&](int z) { return 0.4 * std::exp(-rate * z); });
    auto c = quadratic_covariance(m);
    ToeplitzKernel e = ToeplitzKernel::zeros(1, c.eps.R);
    e.values = c.eps.values;
    auto fit = decay_fit(prefix(shell_profile(e), 30));
    EXPECT_EQ(fit.cls, DecayClass::exponential);
    EXPECT_GT(fit.rate, 0.0);
    EXPECT_LE(fit.rate, rate + 1e-3);
}

TEST(QuadraticRho, PolynomialCouplingsKeepTheExponent)
{
    const double alpha = 3.0;
    auto m = ring_quadratic(400, [&](int z) { return 0.25 * std::pow(double(z), -alpha); });
    auto c = quadratic_covariance(m);
    ToeplitzKernel e = ToeplitzKernel::zeros(1, c.eps.R);
    e.values = c.eps.values;
    auto profile = prefix(shell_profile(e), 200);
    // fit the far field only
    std::vector<double> far(profile.begin(), profile.end());
    for (std::size_t r = 0; r < 20; ++r) far[r] = 0.0;
    auto fit = decay_fit(far);
    EXPECT_EQ(fit.cls, DecayClass::polynomial);
    EXPECT_NEAR(fit.exponent, alpha, 0.1 * alpha);
}

TEST(IsingConstants, ClosedForms)
{
    EXPECT_NEAR(ising_c0(1, 2.0), std::cosh(2.0) + 1.0, 1e-14);
    const double T = 3.0, n = 2.0;
    double k0 = 1.0 - 4.0 / (std::exp(8 * n / T) + 2 * std::exp((4 * n + 2) / T) + 1);
    EXPECT_NEAR(ising_k0(2, T), k0, 1e-15);
    EXPECT_GT(ising_k0(1, 1.0), 0.0);
    EXPECT_LT(ising_k0(1, 1.0), 1.0);
}

TEST(IsingExact, RingMatchesTransferMatrix)
{
    const double T = 1.5;
    const int L = 14;
    auto sys = ising_exact(IsingTorus{1, L, T, {}, {}});
    const double th = std::tanh(1.0 / T);
    for (int d = 1; d <= L / 2; ++d) {
        double want = (std::pow(th, d) + std::pow(th, L - d)) / (1.0 + std::pow(th, L));
        EXPECT_NEAR(ring_spin_corr(sys, std::size_t(d)), want, 1e-12) << d;
        EXPECT_NEAR(ring_spin_corr(sys, std::size_t(d)), std::pow(th, d), 2.0 * std::pow(th, L - d)) << d;
    }
}

TEST(IsingExact, SizeLimit)
{
    EXPECT_THROW(ising_exact(IsingTorus{2, 5, 2.0, {}, {}}), Error);
    EXPECT_THROW(ising_exact(IsingTorus{1, 1, 2.0, {}, {}}), Error);
    EXPECT_THROW(ising_exact(IsingTorus{1, 4, 0.0, {}, {}}), Error);
}

TEST(IsingEpsilonTest, HighTemperatureVanishes)
{
    auto e = ising_epsilon(IsingTorus{1, 8, 1e4, {}, {}}, EpsilonMethod::exact);
    for (double v : e.kernel.values) EXPECT_LT(v, 1e-3);
}

TEST(IsingEpsilonTest, SquareTorusBelowK0)
{
    const double T = 3.0;
    auto e = ising_epsilon(IsingTorus{2, 3, T, {}, {}}, EpsilonMethod::exact);
    EXPECT_TRUE(e.subjective);
    for (double v : e.kernel.values) EXPECT_LE(v, e.k0 + 1e-12);

    // direct clamp scan of the boundary of a single interior pair
    IsingTorus t{2, 3, T, {}, {}};
    std::vector<int> rest;
    for (int s = 2; s < 9; ++s) rest.push_back(s);
    for (int mask = 0; mask < (1 << 7); ++mask) {
        IsingTorus c = t;
        c.clamp_sites = rest;
        for (int b = 0; b < 7; ++b) c.clamp_values.push_back((mask >> b) & 1 ? 1 : -1);
        auto sys = ising_exact(c);
        ASSERT_EQ(sys.num_vars(), 2u);
        EXPECT_LE(maxcorr_blocks(sys, {0}, {1}), e.k0 + 1e-12);
    }
}

TEST(IsingEpsilonTest, RingDecaysMonotonically)
{
    auto e = ising_epsilon(IsingTorus{1, 9, 1.2, {}, {}}, EpsilonMethod::exact);
    for (int z = 1; z < 4; ++z) EXPECT_GE(e.kernel.at({z}), e.kernel.at({z + 1}));
    EXPECT_LE(e.kernel.at({1}), e.k0);
}

TEST(IsingEpsilonTest, McmcAgreesWithRing)
{
    const double T = 2.0;
    const int L = 32;
    McmcBudget b;
    b.burn_in = 500;
    b.samples = 4000;
    b.thin = 2;
    auto e = ising_epsilon(IsingTorus{1, L, T, {}, {}}, EpsilonMethod::mcmc, 7, b);
    const double th = std::tanh(1.0 / T);
    for (int d = 1; d <= 3; ++d) {
        double want = (std::pow(th, d) + std::pow(th, L - d)) / (1.0 + std::pow(th, L));
        EXPECT_NEAR(e.kernel.at({d}), want, 0.03) << d;
        EXPECT_LE(e.ci_low.at({d}), e.kernel.at({d}));
        EXPECT_GE(e.ci_high.at({d}), e.kernel.at({d}));
    }
}

TEST(CLT, IndependentSpins)
{
    auto rep = clt_experiment(IsingTorus{1, 64, 1e9, {}, {}}, [](int s) { return double(s); }, {32}, 10000, 5);
    ASSERT_EQ(rep.rows.size(), 1u);
    EXPECT_LT(rep.rows[0].cf_distance, 0.02);
    EXPECT_NEAR(rep.rows[0].sigma_hat2, 1.0, 0.05);
}

TEST(CLT, QuadraticModelIsGaussian)
{
    auto m = nearest_neighbour_quadratic(1, 0.3);
    auto rep = clt_experiment(m, {1, 4, 16}, 10000, 6);
    for (const auto& row : rep.rows) {
        EXPECT_LT(row.cf_distance, 0.02);
        EXPECT_NEAR(row.sigma_hat2 / row.sigma_block2, 1.0, 0.05);
    }
    EXPECT_NEAR(rep.sigma2_limit, quadratic_covariance(m).total / m.beta, 1e-12);
}

TEST(CLT, IsingRingVarianceLimit)
{
    const double T = 3.0, th = std::tanh(1.0 / T);
    auto rep = clt_experiment(IsingTorus{1, 1024, T, {}, {}}, [](int s) { return double(s); }, {1, 4, 64, 256}, 4000, 8);
    EXPECT_NEAR(rep.sigma2_limit, (1 + th) / (1 - th), 1e-12);
    EXPECT_NEAR(rep.rows.back().sigma_hat2 / rep.sigma2_limit, 1.0, 0.05);
    EXPECT_GT(rep.rows[0].cf_distance, rep.rows[2].cf_distance);
    EXPECT_GT(rep.rows[1].cf_distance, rep.rows[3].cf_distance);
}

TEST(CLT, BlockShapes)
{
    auto cube = detail::block_offsets(2, 7, BlockShape::cube);
    auto disk = detail::block_offsets(2, 7, BlockShape::disk);
    EXPECT_EQ(cube.size(), 49u);
    EXPECT_LT(disk.size(), cube.size());
    EXPECT_GT(disk.size(), 49u / 2);
    auto rep = clt_experiment(IsingTorus{2, 8, 10.0, {}, {}}, [](int s) { return double(s); }, {6}, 50, 9,
                              BlockShape::disk, McmcBudget{20, 0, 1});
    EXPECT_EQ(rep.rows[0].block_sites, detail::block_offsets(2, 6, BlockShape::disk).size());
}

TEST(PhaseProduct, IndependentBlocks)
{
    auto sys = FiniteSystem::from_weights({{"a", 2}, {"b", 2}, {"c", 2}, {"d", 2}}, [](const std::vector<int>& d) {
        double w = 1.0;
        for (int v : d) w *= v ? 0.3 : 0.7;
        return w;
    });
    auto r = phase_product_bound(sys, {{0, 1}, {2, 3}}, 1.3);
    EXPECT_LT(r.lhs, 1e-14);
    EXPECT_TRUE(r.holds);
}

TEST(PhaseProduct, CorrelatedPairStrict)
{
    const double g = 0.5;
    auto sys = FiniteSystem::from_weights({{"s1", 2}, {"s2", 2}},
                                          [&](const std::vector<int>& d) { return d[0] == d[1] ? 1 + g : 1 - g; });
    for (double lambda : {0.5, 1.0, 2.0}) {
        auto r = phase_product_bound(sys, {{0}, {1}}, lambda);
        std::complex<double> phi = 0.5 * (1.0 + std::polar(1.0, lambda));
        std::complex<double> joint = 0.25 * (1 + g) * (1.0 + std::polar(1.0, 2 * lambda)) + 0.25 * (1 - g) * 2.0 *
                                                                                           std::polar(1.0, lambda);
        EXPECT_NEAR(r.lhs, std::abs(joint - phi * phi), 1e-14);
        EXPECT_NEAR(r.eps_bar, g, 1e-12);
        EXPECT_GT(r.lhs, 0.0);
        EXPECT_LT(r.lhs, r.rhs);
    }
}

TEST(PhaseProduct, ZeroFrequency)
{
    auto sys = FiniteSystem::from_weights({{"s1", 2}, {"s2", 2}},
                                          [](const std::vector<int>& d) { return d[0] == d[1] ? 1.7 : 0.3; });
    auto r = phase_product_bound(sys, {{0}, {1}}, 0.0);
    EXPECT_NEAR(r.lhs, 0.0, 1e-15);
    EXPECT_NEAR(r.rhs, 0.0, 1e-15);
}

TEST(PhaseProduct, MismatchedBlocksRejected)
{
    auto sys = FiniteSystem::from_weights({{"s1", 2}, {"s2", 2}},
                                          [](const std::vector<int>& d) { return d[0] ? 3.0 : 1.0; });
    EXPECT_THROW(phase_product_bound(sys, {{0}, {1}}, 1.0), Error);
}
