#include <rhomix/glauber.hpp>
#include <rhomix/lattice.hpp>
#include <rhomix/random.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace rhomix;

namespace {

// Two binary spins with P(s1 = s2) = (1 + g) / 2.
FiniteSystem spin_pair(double g)
{
    return FiniteSystem::from_weights({{"s1", 2}, {"s2", 2}},
                                      [&](const std::vector<int>& d) { return d[0] == d[1] ? 1.0 + g : 1.0 - g; });
}

Matrix random_eps(std::mt19937_64& rng, Index N, double scale)
{
    std::uniform_real_distribution<double> u(0.0, scale);
    Matrix e = Matrix::Zero(N, N);
    for (Index i = 0; i < N; ++i)
        for (Index j = i + 1; j < N; ++j) e(i, j) = e(j, i) = u(rng);
    return e;
}

} // namespace

TEST(GapBounds, ZeroEpsilon)
{
    auto r = gap_lower_bounds(Matrix::Zero(3, 3));
    EXPECT_LT((r.M - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(r.bound_M, 1.0, 1e-12);
    EXPECT_NEAR(r.bound_Mprime, 1.0, 1e-12);
    EXPECT_NEAR(r.bound_simple, 1.0, 1e-12);
}

TEST(GapBounds, TwoSitesHalf)
{
    Matrix e(2, 2);
    e << 0, 0.5, 0.5, 0;
    auto r = gap_lower_bounds(e);
    Matrix want(2, 2);
    want << 4.0 / 3.0, 2.0 / 3.0, 0, 1;
    EXPECT_LT((r.M - want).cwiseAbs().maxCoeff(), 1e-14);
    // largest eigenvalue of M^T M, computed by hand
    Matrix MtM = want.transpose() * want;
    double tr = MtM.trace(), det = MtM.determinant();
    double top = 0.5 * (tr + std::sqrt(tr * tr - 4 * det));
    EXPECT_NEAR(r.bound_M, 1.0 / top, 1e-12);
    EXPECT_NEAR(r.bound_M, 18.0 / (29.0 + std::sqrt(265.0)), 1e-12);
    EXPECT_NEAR(r.bound_simple, 0.25, 1e-14);
}

TEST(GapBounds, UnitEpsilonRejected)
{
    Matrix e(2, 2);
    e << 0, 1, 1, 0;
    EXPECT_THROW(gap_lower_bounds(e), Error);
}

TEST(GapBounds, LargeRadiusOmitsMprime)
{
    Matrix e = Matrix::Constant(4, 4, 0.5);
    e.diagonal().setZero();
    auto r = gap_lower_bounds(e);
    EXPECT_FALSE(r.mprime_defined);
    EXPECT_GT(r.bound_M, 0.0);
    EXPECT_EQ(r.bound_simple, 0.0);
}

TEST(GapBounds, OrderingOnRandomEpsilon)
{
    std::mt19937_64 rng(1);
    for (int t = 0; t < 200; ++t) {
        Index N = 2 + Index(t % 5);
        Matrix e = random_eps(rng, N, 0.9 / double(N - 1));
        auto r = gap_lower_bounds(e);
        ASSERT_TRUE(r.mprime_defined);
        EXPECT_LE((r.M - r.Mprime).maxCoeff(), 1e-12);
        EXPECT_GE(r.bound_M, r.bound_Mprime - 1e-12);
        EXPECT_GE(r.bound_Mprime, r.bound_simple - 1e-12);
        EXPECT_LE(r.bound_M, 1.0 + 1e-12);
    }
}

TEST(ExactGap, ProductMeasureHasUnitGap)
{
    std::mt19937_64 rng(2);
    for (int t = 0; t < 10; ++t) {
        FiniteSystem sys = random_product_system(rng, 2 + t % 3, 3);
        EXPECT_NEAR(exact_gap(sys), 1.0, 1e-10);
    }
}

TEST(ExactGap, SpinPairClosedForm)
{
    for (double g : {0.0, 0.3, 0.8, -0.5}) {
        FiniteSystem sys = spin_pair(g);
        double gap = exact_gap(sys);
        EXPECT_NEAR(gap, 1.0 - std::abs(g), 1e-12);
        Matrix eps = measured_epsilon(sys);
        EXPECT_NEAR(eps(0, 1), std::abs(g), 1e-12);
        EXPECT_GE(gap, gap_lower_bounds(eps).bound_M - 1e-12);
    }
}

TEST(ExactGap, SoundAgainstMeasuredEpsilon)
{
    std::mt19937_64 rng(3);
    double worst = 1e9;
    for (int t = 0; t < 80; ++t) {
        FiniteSystem sys = random_system(rng, 2 + t % 4, 2, 0.3 + 0.02 * t);
        double gap = exact_gap(sys);
        auto r = gap_lower_bounds(measured_epsilon(sys));
        EXPECT_GE(gap, r.bound_M - 1e-9);
        worst = std::min(worst, gap - r.bound_M);
    }
    EXPECT_GE(worst, -1e-9);
}

TEST(ExactGap, InvariantUnderRelabelling)
{
    std::mt19937_64 rng(4);
    FiniteSystem sys = random_system(rng, 3, 3, 1.0);
    double gap = exact_gap(sys);
    // swap the first two sites and reverse the alphabet of the last one
    std::vector<Variable> vars = {sys.vars()[1], sys.vars()[0], sys.vars()[2]};
    const int k = sys.size(2);
    FiniteSystem perm = FiniteSystem::from_weights(vars, [&](const std::vector<int>& d) {
        return sys.prob(sys.encode({d[1], d[0], k - 1 - d[2]}));
    });
    EXPECT_NEAR(exact_gap(perm), gap, 1e-10);
}

TEST(ExactGap, GeneratorIsStationary)
{
    std::mt19937_64 rng(5);
    FiniteSystem sys = random_system(rng, 3, 3, 1.5);
    Matrix L = glauber_generator(sys);
    Vector pi = Eigen::Map<const Vector>(sys.joint().data(), Index(sys.num_states()));
    EXPECT_LT(L.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((L.transpose() * pi).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ExactGap, SizeCap)
{
    std::vector<Variable> vars(13, Variable{"s", 2});
    FiniteSystem sys = FiniteSystem::from_weights(vars, [](const std::vector<int>&) { return 1.0; });
    EXPECT_THROW(exact_gap(sys), Error);
}

TEST(Simulation, IndependentSpinsRelaxAtUnitRate)
{
    std::mt19937_64 rng(6);
    FiniteSystem sys = random_product_system(rng, 3, 2);
    FiniteGlauberModel model(sys);
    SimulationConfig cfg;
    cfg.max_events = 1000000;
    cfg.dt = 0.05;
    auto rep = glauber_simulate(model, [](const std::vector<int>& s) { return double(s[0]); }, cfg, 11);
    EXPECT_NEAR(rep.fitted_rate, 1.0, 0.05);
}

TEST(Simulation, SpinPairMatchesExactGap)
{
    FiniteSystem sys = spin_pair(0.6);
    auto ex = exact_gap_detail(sys);
    FiniteGlauberModel model(sys);
    SimulationConfig cfg;
    cfg.max_events = 1000000;
    cfg.dt = 0.05;
    auto rep = glauber_simulate(
        model, [&](const std::vector<int>& s) { return ex.eigenfunction[sys.encode(s)]; }, cfg, 12);
    EXPECT_NEAR(rep.fitted_rate / ex.gap, 1.0, 0.10);
}

TEST(Simulation, DeterministicPerSeed)
{
    FiniteSystem sys = spin_pair(0.4);
    FiniteGlauberModel model(sys);
    SimulationConfig cfg;
    cfg.max_events = 5000;
    cfg.record = true;
    auto f = [](const std::vector<int>& s) { return double(s[0]); };
    auto a = glauber_simulate(model, f, cfg, 99), b = glauber_simulate(model, f, cfg, 99);
    ASSERT_EQ(a.trajectory.size(), b.trajectory.size());
    for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
        EXPECT_EQ(a.trajectory[i].time, b.trajectory[i].time);
        EXPECT_EQ(a.trajectory[i].site, b.trajectory[i].site);
    }
}

TEST(Simulation, HotIsingRingAboveLatticeBound)
{
    const double T = 5.0;
    auto eps = ising_epsilon(IsingTorus{1, 8, T, {}, {}}, EpsilonMethod::exact);
    auto bound = sublattice_gap(eps.kernel);
    ASSERT_GT(bound.value, 0.0);
    IsingGlauberModel model(IsingTorus{1, 64, T, {}, {}});
    SimulationConfig cfg;
    cfg.max_events = 2000000;
    cfg.dt = 0.05;
    auto rep = glauber_simulate(
        model,
        [](const std::vector<int>& s) {
            double m = 0.0;
            for (int d : s) m += spin_of(d);
            return m;
        },
        cfg, 13);
    EXPECT_GE(rep.fitted_rate, bound.value);
}

TEST(SublatticeGap, SmallSumReducesToSimpleBound)
{
    LatticeKernel k = LatticeKernel::zeros(1, 2);
    k.values = {0.05, 0.2, 0.0, 0.2, 0.05};
    auto g = sublattice_gap(k);
    EXPECT_EQ(g.ell, 1);
    EXPECT_NEAR(g.value, sqr(1.0 - 0.5), 1e-12);
}

TEST(SublatticeGap, NearestNeighbourAndZero)
{
    LatticeKernel k = LatticeKernel::zeros(1, 1);
    k.values = {0.6, 0.0, 0.6};
    EXPECT_GT(sublattice_gap(k).value, 0.0);
    EXPECT_NEAR(sublattice_gap(LatticeKernel::zeros(2, 1)).value, 1.0, 1e-15);
}
