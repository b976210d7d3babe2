#include <rhomix/discrete.hpp>
#include <rhomix/random.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace rhomix;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows)
{
    Matrix m(Index(rows.size()), Index(rows.begin()->size()));
    Index r = 0;
    for (const auto& row : rows) {
        Index c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

Matrix random_joint(std::mt19937_64& rng, Index n, Index m, double s = 1.0)
{
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix J(n, m);
    for (Index a = 0; a < n; ++a)
        for (Index b = 0; b < m; ++b) J(a, b) = std::exp(s * g(rng));
    return J / J.sum();
}

// Brute-force correlation of two functions under a joint table.
double correlation(const Matrix& p, const Vector& f, const Vector& g)
{
    Vector px = row_marginal(p), py = col_marginal(p);
    double mf = px.dot(f), mg = py.dot(g);
    double vf = px.dot(f.cwiseProduct(f)) - mf * mf, vg = py.dot(g.cwiseProduct(g)) - mg * mg;
    double cov = f.dot(p * g) - mf * mg;
    return cov / std::sqrt(vf * vg);
}

// X uniform over p-subsets of {0..n-1}, Y uniform inside X.
struct SubsetLaw {
    std::vector<unsigned> subsets;
    Matrix joint;  // rows: subsets, cols: elements
};

SubsetLaw subset_law(int n, int p)
{
    SubsetLaw s;
    for (unsigned m = 0; m < (1u << n); ++m)
        if (std::popcount(m) == p) s.subsets.push_back(m);
    s.joint = Matrix::Zero(Index(s.subsets.size()), n);
    for (std::size_t r = 0; r < s.subsets.size(); ++r)
        for (int y = 0; y < n; ++y)
            if (s.subsets[r] >> y & 1u) s.joint(Index(r), y) = 1.0;
    s.joint /= s.joint.sum();
    return s;
}

} // namespace

TEST(PairMaxcorr, SymmetricTwoByTwo)
{
    EXPECT_NEAR(maxcorr(mat({{0.4, 0.1}, {0.1, 0.4}})), 0.6, 1e-12);
}

TEST(PairMaxcorr, ProductLawIsZero)
{
    Vector a(3), b(4);
    a << 0.2, 0.5, 0.3;
    b << 0.1, 0.2, 0.3, 0.4;
    EXPECT_NEAR(maxcorr(a * b.transpose()), 0.0, 1e-12);
}

TEST(PairMaxcorr, KinkedThreeByThree)
{
    const double a = 2.0 / 9.0, b = 1.0 / 18.0, al = 1.0 / 18.0;
    Matrix J = mat({{a, b, b}, {b, a + al, b - al}, {b, b - al, a + al}});
    // Nonnegative shifts give 1/2 + 6 alpha.
    EXPECT_NEAR(maxcorr(J), 5.0 / 6.0, 1e-12);
}

TEST(PairMaxcorr, SubsetMembershipClosedForm)
{
    for (auto [n, p] : {std::pair{5, 2}, std::pair{6, 3}, std::pair{7, 2}}) {
        double want = std::sqrt(double(n - p) / (double(p) * (n - 1)));
        EXPECT_NEAR(maxcorr(subset_law(n, p).joint), want, 1e-12) << n << "," << p;
    }
    EXPECT_NEAR(maxcorr(subset_law(5, 2).joint), std::sqrt(3.0 / 8.0), 1e-12);
}

TEST(PairMaxcorr, TwoByTwoClosedFormAgrees)
{
    std::mt19937_64 rng(11);
    for (int t = 0; t < 200; ++t) {
        Matrix J = random_joint(rng, 2, 2, 1.5);
        EXPECT_NEAR(maxcorr(J), maxcorr_2x2(J), 1e-12);
    }
}

TEST(PairMaxcorr, RangeAndSingularValue)
{
    std::mt19937_64 rng(12);
    for (int t = 0; t < 200; ++t) {
        Index n = 2 + Index(rng() % 5), m = 2 + Index(rng() % 5);
        Matrix J = random_joint(rng, n, m, 2.0);
        auto rep = maxcorr_pair(make_pair(J));
        EXPECT_GE(rep.rho, 0.0);
        EXPECT_LE(rep.rho, 1.0);
        Eigen::JacobiSVD<Matrix> svd(rep.pi_matrix);
        EXPECT_NEAR(rep.rho, svd.singularValues()(0), 1e-10);
    }
}

TEST(PairMaxcorr, WitnessesAttainTheValue)
{
    std::mt19937_64 rng(13);
    for (int t = 0; t < 100; ++t) {
        Matrix J = random_joint(rng, 4, 3, 1.5);
        auto rep = maxcorr_table(J);
        Vector px = row_marginal(J), py = col_marginal(J);
        EXPECT_NEAR(px.dot(rep.optimal_f), 0.0, 1e-10);
        EXPECT_NEAR(py.dot(rep.optimal_g), 0.0, 1e-10);
        EXPECT_NEAR(px.dot(rep.optimal_f.cwiseProduct(rep.optimal_f)), 1.0, 1e-9);
        EXPECT_NEAR(py.dot(rep.optimal_g.cwiseProduct(rep.optimal_g)), 1.0, 1e-9);
        EXPECT_NEAR(correlation(J, rep.optimal_f, rep.optimal_g), rep.rho, 1e-9);
    }
}

TEST(PairMaxcorr, NoFunctionBeatsTheValue)
{
    std::mt19937_64 rng(14);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix J = random_joint(rng, 5, 4, 1.0);
    double rho = maxcorr(J);
    for (int t = 0; t < 2000; ++t) {
        Vector f(5), h(4);
        for (Index i = 0; i < 5; ++i) f(i) = g(rng);
        for (Index i = 0; i < 4; ++i) h(i) = g(rng);
        EXPECT_LE(std::abs(correlation(J, f, h)), rho + 1e-12);
    }
}

TEST(PairMaxcorr, CoarseningCannotIncrease)
{
    std::mt19937_64 rng(15);
    for (int t = 0; t < 100; ++t) {
        Matrix J = random_joint(rng, 5, 4, 1.5);
        Matrix merged(4, 4);
        merged.row(0) = J.row(0) + J.row(1);
        merged.bottomRows(3) = J.bottomRows(3);
        EXPECT_LE(maxcorr(merged), maxcorr(J) + 1e-12);
    }
}

TEST(PairMaxcorr, RowStreamMatchesDense)
{
    std::mt19937_64 rng(16);
    for (int t = 0; t < 50; ++t) {
        Matrix J = random_joint(rng, 7, 4, 1.5);
        if (t % 5 == 0) J(2, 1) = 0.0, J /= J.sum();
        RowStreamMaxcorr s(4);
        for (Index a = 0; a < J.rows(); ++a) {
            std::vector<std::pair<Index, double>> row;
            for (Index b = 0; b < 4; ++b)
                if (J(a, b) > 0.0) row.emplace_back(b, J(a, b));
            s.add_row(row);
        }
        EXPECT_NEAR(s.maxcorr(), maxcorr(J), 1e-10);
    }
}

TEST(PairMaxcorr, RejectsInvalidJoint)
{
    EXPECT_THROW(make_pair(mat({{0.5, 0.6}, {0.0, 0.0}})), Error);
    EXPECT_THROW(make_pair(mat({{-0.1, 0.6}, {0.3, 0.2}})), Error);
}

TEST(FiniteSystemTest, EncodeDecodeRoundTrip)
{
    std::mt19937_64 rng(17);
    FiniteSystem sys = random_system(rng, 4, 3);
    for (std::size_t s = 0; s < sys.num_states(); ++s) EXPECT_EQ(sys.encode(sys.decode(s)), s);
}

TEST(FiniteSystemTest, BlockCorrelationOfChainedSubsets)
{
    // X -> Y -> Z where (Y, X) and (Y, Z) both follow the subset-membership law.
    const int n = 4, p = 2;
    SubsetLaw law = subset_law(n, p);
    const int nx = int(law.subsets.size());
    FiniteSystem sys = FiniteSystem::from_weights({{"X", nx}, {"Y", n}, {"Z", nx}}, [&](const std::vector<int>& d) {
        // P(x, y, z) = P(x, y) P(z | y), all conditionals uniform over subsets containing y.
        return law.joint(d[0], d[1]) * law.joint(d[2], d[1]);
    });
    double lower = std::sqrt(double((n - 1) * (n - 1) - (p - 1) * (p - 1)) /
                             double((n - 1) * (n - 1) + (n - 1) * (p - 1) * (p - 1)));
    EXPECT_NEAR(lower, std::sqrt(8.0 / 12.0), 1e-15);
    EXPECT_GE(maxcorr_blocks(sys, {1}, {0, 2}), lower - 1e-12);
    EXPECT_NEAR(maxcorr_blocks(sys, {0}, {1}), std::sqrt(double(n - p) / (double(p) * (n - 1))), 1e-12);
}

TEST(FiniteSystemTest, OverlappingBlocksRejected)
{
    std::mt19937_64 rng(18);
    FiniteSystem sys = random_system(rng, 3, 2);
    EXPECT_THROW(maxcorr_blocks(sys, {0, 1}, {1}), Error);
}

TEST(Subjective, SharedCoordinateConditionsToZero)
{
    // X = (c, a), Y = (c, b) with a, b, c fair independent bits, Z = c.
    FiniteSystem sys = FiniteSystem::from_weights({{"X", 4}, {"Y", 4}, {"Z", 2}}, [](const std::vector<int>& d) {
        int cx = d[0] >> 1, cy = d[1] >> 1;
        return (cx == cy && cx == d[2]) ? 1.0 : 0.0;
    });
    EXPECT_NEAR(maxcorr_blocks(sys, {0}, {1}), 1.0, 1e-12);
    auto rep = subjective_maxcorr_detail(sys, {0}, {1}, {2});
    EXPECT_NEAR(rep.value, 1.0, 1e-12);  // the empty conditioning is in the pool
    // Conditioned on Z alone the pair is independent for each value.
    for (int z = 0; z < 2; ++z) {
        Matrix slice = Matrix::Zero(4, 4);
        for (std::size_t s = 0; s < sys.num_states(); ++s)
            if (sys.digit(s, 2) == z) slice(sys.digit(s, 0), sys.digit(s, 1)) += sys.prob(s);
        EXPECT_NEAR(maxcorr_table(slice).rho, 0.0, 1e-12);
    }
}

TEST(Subjective, CoarserConditioningCanCorrelate)
{
    // X = (X1, X2), Y = (Y1, Y2) independent uniform; Z' = 1{X1 = Y1}.
    FiniteSystem sys = FiniteSystem::from_weights({{"X", 4}, {"Y", 4}, {"Zp", 2}}, [](const std::vector<int>& d) {
        int x1 = d[0] >> 1, y1 = d[1] >> 1;
        return (x1 == y1) == (d[2] == 1) ? 1.0 : 0.0;
    });
    EXPECT_NEAR(maxcorr_blocks(sys, {0}, {1}), 0.0, 1e-12);
    auto rep = subjective_maxcorr_detail(sys, {0}, {1}, {2});
    EXPECT_NEAR(rep.value, 1.0, 1e-12);
    ASSERT_EQ(rep.conditioned, std::vector<int>{2});

    // With the finer Z = (X1, Y1) every conditional law factorises.
    FiniteSystem fine = FiniteSystem::from_weights({{"X", 4}, {"Y", 4}, {"Z", 4}}, [](const std::vector<int>& d) {
        return d[2] == ((d[0] >> 1) << 1 | (d[1] >> 1)) ? 1.0 : 0.0;
    });
    for (int z = 0; z < 4; ++z) {
        Matrix slice = Matrix::Zero(4, 4);
        for (std::size_t s = 0; s < fine.num_states(); ++s)
            if (fine.digit(s, 2) == z) slice(fine.digit(s, 0), fine.digit(s, 1)) += fine.prob(s);
        EXPECT_NEAR(maxcorr_table(slice).rho, 0.0, 1e-12);
    }
}

TEST(Subjective, DominatesPlainAndMonotoneInPool)
{
    std::mt19937_64 rng(19);
    for (int t = 0; t < 30; ++t) {
        FiniteSystem sys = random_system(rng, 4, 3, 1.5);
        double plain = maxcorr_blocks(sys, {0}, {1});
        double small = subjective_maxcorr(sys, 0, 1, {2});
        double big = subjective_maxcorr(sys, 0, 1, {2, 3});
        EXPECT_LE(plain, small + 1e-12);
        EXPECT_LE(small, big + 1e-12);
        EXPECT_LE(big, 1.0);
    }
}

TEST(Subjective, PoolCapEnforced)
{
    std::vector<Variable> vars(15, Variable{"v", 2});
    FiniteSystem sys = FiniteSystem::from_weights(vars, [](const std::vector<int>&) { return 1.0; });
    std::vector<int> pool(13);
    std::iota(pool.begin(), pool.end(), 2);
    EXPECT_THROW(subjective_maxcorr(sys, 0, 1, pool), Error);
}

TEST(Mixing, BlockDiagonalLaw)
{
    for (double e : {0.1, 0.3, 0.5}) {
        auto m = mixing_coefficients(make_pair(mat({{e, 0.0}, {0.0, 1.0 - e}})));
        EXPECT_NEAR(m.alpha, e - e * e, 1e-12);
        EXPECT_NEAR(m.mutual_information, -e * std::log(e) - (1 - e) * std::log(1 - e), 1e-12);
        EXPECT_NEAR(maxcorr(mat({{e, 0.0}, {0.0, 1.0 - e}})), 1.0, 1e-12);
    }
}

TEST(Mixing, UniformDiagonal)
{
    for (int k : {2, 3, 5}) {
        Matrix J = Matrix::Identity(k, k) / double(k);
        auto m = mixing_coefficients(make_pair(J));
        EXPECT_NEAR(m.beta, 1.0 - 1.0 / k, 1e-12);
        EXPECT_NEAR(m.mutual_information, std::log(double(k)), 1e-12);
    }
}

TEST(Mixing, AlphaBelowQuarterAndBeta)
{
    std::mt19937_64 rng(20);
    for (int t = 0; t < 100; ++t) {
        auto m = mixing_coefficients(make_pair(random_joint(rng, 3, 4, 2.0)));
        EXPECT_LE(m.alpha, 0.25 + 1e-12);
        EXPECT_LE(m.alpha, m.beta + 1e-12);
        EXPECT_GE(m.mutual_information, 0.0);
    }
}

TEST(EventScan, TwoByTwoRatioIsMaxcorr)
{
    std::mt19937_64 rng(21);
    for (int t = 0; t < 50; ++t) {
        Matrix J = random_joint(rng, 2, 2, 1.5);
        EXPECT_NEAR(event_extremes(make_pair(J)).max_ratio, maxcorr(J), 1e-12);
    }
}

TEST(EventScan, RatioNeverExceedsMaxcorr)
{
    std::mt19937_64 rng(22);
    for (int t = 0; t < 100; ++t) {
        Matrix J = random_joint(rng, 4, 4, 2.0);
        auto ex = event_extremes(make_pair(J));
        EXPECT_LE(ex.max_ratio, maxcorr(J) + 1e-12);
        EXPECT_NEAR(ex.max_ratio, event_ratio(J, ex.event_a, ex.event_b), 1e-15);
    }
}

TEST(EventScan, ScanIsExhaustive)
{
    std::mt19937_64 rng(23);
    Matrix J = random_joint(rng, 4, 3, 2.0);
    double best = 0.0;
    for (unsigned A = 1; A < 15; ++A)
        for (unsigned B = 1; B < 7; ++B) {
            std::vector<bool> a(4), b(3);
            for (int i = 0; i < 4; ++i) a[std::size_t(i)] = A >> i & 1u;
            for (int i = 0; i < 3; ++i) b[std::size_t(i)] = B >> i & 1u;
            best = std::max(best, event_ratio(J, a, b));
        }
    EXPECT_NEAR(event_extremes(make_pair(J)).max_ratio, best, 1e-12);
}

TEST(EventScan, SizeCap)
{
    Matrix J = Matrix::Constant(21, 2, 1.0 / 42.0);
    EXPECT_THROW(event_extremes(make_pair(J)), Error);
}

TEST(Density, BoundsMaxcorr)
{
    // |0.3 - 0.25| / 0.25 = 0.2 for both the correlation and the chi-square distance.
    Matrix J2 = mat({{0.3, 0.2}, {0.2, 0.3}});
    EXPECT_NEAR(maxcorr(J2), 0.2, 1e-12);
    EXPECT_GE(density_bound(make_pair(J2)), maxcorr(J2) - 1e-12);
    // Uniform diagonal on three symbols: chi-square distance sqrt(k - 1).
    EXPECT_NEAR(density_bound(make_pair(Matrix::Identity(3, 3) / 3.0)), std::sqrt(2.0), 1e-12);
    std::mt19937_64 rng(24);
    for (int t = 0; t < 100; ++t) {
        Matrix J = random_joint(rng, 3, 5, 1.5);
        EXPECT_LE(maxcorr(J), density_bound(make_pair(J)) + 1e-12);
    }
}

TEST(Density, ZeroMarginalRejected)
{
    EXPECT_THROW(density_bound(make_pair(mat({{0.5, 0.0}, {0.5, 0.0}}))), Error);
}

TEST(Markov, ExampleChain)
{
    Matrix P = mat({{0, 0.5, 1}, {1, 0, 0}, {0, 0.5, 0}});
    auto rep = markov_chain_checks(P, 10, StochasticLayout::columns);
    ASSERT_EQ(rep.rho.size(), 10u);
    EXPECT_NEAR(rep.rho[0], 1.0, 1e-10);
    for (std::size_t t = 1; t < rep.rho.size(); ++t) EXPECT_LE(rep.rho[t], rep.rho[t - 1] + 1e-12);
    EXPECT_NEAR(rep.stationary.sum(), 1.0, 1e-12);
}

TEST(Markov, ReversibleTwoStatePowerLaw)
{
    Matrix T = mat({{0.7, 0.3}, {0.2, 0.8}});
    auto rep = markov_chain_checks(T, 8, StochasticLayout::rows);
    EXPECT_TRUE(rep.reversible);
    // Second eigenvalue of a two-state chain is 1 - a - b.
    for (std::size_t t = 0; t < rep.rho.size(); ++t) EXPECT_NEAR(rep.rho[t], std::pow(0.5, double(t + 1)), 1e-10);
}

TEST(Markov, ContractionOnRandomChains)
{
    std::mt19937_64 rng(25);
    for (int t = 0; t < 50; ++t) {
        Matrix T = random_joint(rng, 4, 4, 1.0);
        for (Index r = 0; r < 4; ++r) T.row(r) /= T.row(r).sum();
        auto rep = markov_chain_checks(T, 6, StochasticLayout::rows);
        for (std::size_t k = 1; k < rep.rho.size(); ++k) {
            EXPECT_LE(rep.rho[k], rep.rho[k - 1] + 1e-12);
            EXPECT_LE(rep.rho[k], rep.product_bound[k] + 1e-10);
        }
    }
}

TEST(Markov, NonErgodicRejected)
{
    EXPECT_THROW(markov_chain_checks(Matrix::Identity(3, 3), 2, StochasticLayout::rows), Error);
}
