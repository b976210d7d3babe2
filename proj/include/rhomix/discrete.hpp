#pragma once

#include "core.hpp"
#include "linalg.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace rhomix {

/** @brief Joint law of two finite random variables. */
struct FinitePair {
    std::vector<std::string> labels_x;
    std::vector<std::string> labels_y;
    Matrix joint;
};

inline std::vector<std::string> default_labels(Index n)
{
    std::vector<std::string> out;
    for (Index i = 0; i < n; ++i) out.push_back(std::to_string(i));
    return out;
}

inline void validate_joint(const Matrix& joint, const std::string& what = "joint")
{
    require(joint.rows() >= 1 && joint.cols() >= 1, ErrorKind::invalid_input, what + " must be non-empty");
    double s = 0.0;
    for (Index i = 0; i < joint.rows(); ++i)
        for (Index j = 0; j < joint.cols(); ++j) {
            double v = joint(i, j);
            require(std::isfinite(v) && v >= 0.0, ErrorKind::invalid_input, what + " entries must be finite and >= 0");
            s += v;
        }
    require(std::abs(s - 1.0) <= tol::probability_sum * std::max<double>(1.0, double(joint.size()) / 64.0),
            ErrorKind::invalid_input, what + " must sum to 1");
}

inline void validate(const FinitePair& p)
{
    validate_joint(p.joint);
    require(p.labels_x.empty() || Index(p.labels_x.size()) == p.joint.rows(), ErrorKind::invalid_input,
            "labels_x size mismatch");
    require(p.labels_y.empty() || Index(p.labels_y.size()) == p.joint.cols(), ErrorKind::invalid_input,
            "labels_y size mismatch");
}

inline FinitePair make_pair(const Matrix& joint)
{
    FinitePair p{default_labels(joint.rows()), default_labels(joint.cols()), joint};
    validate(p);
    return p;
}

inline Vector row_marginal(const Matrix& joint) { return joint.rowwise().sum(); }
inline Vector col_marginal(const Matrix& joint) { return joint.colwise().sum().transpose(); }

struct PairCorrelationReport {
    double rho = 0.0;
    Matrix pi_matrix;
    Vector optimal_f;
    Vector optimal_g;
};

/** Maximal correlation of an unnormalised nonnegative table (normalised internally). */
inline PairCorrelationReport maxcorr_table(const Matrix& table)
{
    PairCorrelationReport out;
    const Index N = table.rows(), M = table.cols();
    out.pi_matrix = Matrix::Zero(N, M);
    out.optimal_f = Vector::Zero(N);
    out.optimal_g = Vector::Zero(M);
    double total = table.sum();
    if (!(total > 0.0)) return out;
    Matrix p = table / total;
    Vector px = row_marginal(p), py = col_marginal(p);
    std::vector<Index> ia, ib;
    for (Index a = 0; a < N; ++a)
        if (px(a) > 0.0) ia.push_back(a);
    for (Index b = 0; b < M; ++b)
        if (py(b) > 0.0) ib.push_back(b);
    if (ia.size() < 2 || ib.size() < 2) return out;

    Matrix pi(Index(ia.size()), Index(ib.size()));
    for (std::size_t r = 0; r < ia.size(); ++r)
        for (std::size_t c = 0; c < ib.size(); ++c) {
            Index a = ia[r], b = ib[c];
            pi(Index(r), Index(c)) = (p(a, b) - px(a) * py(b)) / std::sqrt(px(a) * py(b));
            out.pi_matrix(a, b) = pi(Index(r), Index(c));
        }
    SingularTriple st = top_singular(pi);
    out.rho = clamp01(st.sigma);
    if (out.rho <= 0.0) return out;
    for (std::size_t r = 0; r < ia.size(); ++r) out.optimal_f(ia[r]) = st.u(Index(r)) / std::sqrt(px(ia[r]));
    for (std::size_t c = 0; c < ib.size(); ++c) out.optimal_g(ib[c]) = st.v(Index(c)) / std::sqrt(py(ib[c]));
    double lead = 0.0;
    for (Index a = 0; a < N && lead == 0.0; ++a)
        if (std::abs(out.optimal_f(a)) > 1e-14) lead = out.optimal_f(a);
    if (lead < 0.0) {
        out.optimal_f = -out.optimal_f;
        out.optimal_g = -out.optimal_g;
    }
    return out;
}

/** Maximal correlation of a finite pair: top singular value of the normalised centred joint. */
inline PairCorrelationReport maxcorr_pair(const FinitePair& pair)
{
    validate(pair);
    return maxcorr_table(pair.joint);
}

inline double maxcorr(const Matrix& joint) { return maxcorr_table(joint).rho; }

/**
 * @brief Maximal correlation of a joint fed one X-row at a time.
 * Keeps only the M x M matrix sum_x p(x,.) p(x,.)^T / p(x), so the X alphabet may be
 * far larger than memory allows for the full table. Sums are compensated.
 */
class RowStreamMaxcorr {
public:
    explicit RowStreamMaxcorr(Index cols)
        : M_(cols), gram_(std::size_t(cols * cols)), gram_c_(std::size_t(cols * cols), 0.0),
          py_(std::size_t(cols)), py_c_(std::size_t(cols), 0.0)
    {
        require(cols >= 1, ErrorKind::invalid_input, "need at least one column");
    }

    /** Sparse row of joint probabilities: (column, p(x, column)) entries. */
    void add_row(const std::vector<std::pair<Index, double>>& row)
    {
        double px = 0.0;
        for (const auto& [b, v] : row) {
            require(b >= 0 && b < M_ && std::isfinite(v) && v >= 0.0, ErrorKind::invalid_input, "bad row entry");
            px += v;
        }
        if (!(px > 0.0)) return;
        for (const auto& [b, v] : row) {
            add(py_[std::size_t(b)], py_c_[std::size_t(b)], v);
            for (const auto& [c, w] : row) {
                std::size_t k = std::size_t(b * M_ + c);
                add(gram_[k], gram_c_[k], v * w / px);
            }
        }
    }

    double maxcorr() const
    {
        Vector s(M_);
        double total = 0.0;
        for (Index b = 0; b < M_; ++b) total += py_[std::size_t(b)];
        require(total > 0.0, ErrorKind::zero_marginal, "no mass accumulated");
        for (Index b = 0; b < M_; ++b) s(b) = std::sqrt(py_[std::size_t(b)] / total);
        Matrix K(M_, M_);
        for (Index b = 0; b < M_; ++b)
            for (Index c = 0; c < M_; ++c) {
                double d = s(b) * s(c);
                K(b, c) = d > 0.0 ? gram_[std::size_t(b * M_ + c)] / total / d - d : 0.0;
            }
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (K + K.transpose()), Eigen::EigenvaluesOnly);
        return clamp01(std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff())));
    }

private:
    static void add(double& sum, double& c, double v)
    {
        double y = v - c, t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }

    Index M_;
    std::vector<double> gram_, gram_c_, py_, py_c_;
};

/** Closed form for a 2x2 joint. */
inline double maxcorr_2x2(const Matrix& j)
{
    double p1 = j(0, 0) + j(0, 1), p2 = j(1, 0) + j(1, 1);
    double q1 = j(0, 0) + j(1, 0), q2 = j(0, 1) + j(1, 1);
    double den = std::sqrt(p1 * p2 * q1 * q2);
    if (den == 0.0) return 0.0;
    return clamp01(std::abs(j(0, 0) - p1 * q1) / den);
}

// ---------------------------------------------------------------------------
// Finite systems of several variables

struct Variable {
    std::string name;
    int size = 2;
};

inline constexpr std::size_t max_system_states = std::size_t(1) << 20;

/**
 * @brief Dense joint table over a product of finite alphabets.
 * Row-major, last variable fastest.
 */
class FiniteSystem {
public:
    FiniteSystem() = default;

    FiniteSystem(std::vector<Variable> vars, std::vector<double> joint)
        : vars_(std::move(vars)), joint_(std::move(joint))
    {
        require(!vars_.empty(), ErrorKind::invalid_input, "system needs at least one variable");
        std::size_t total = 1;
        for (const auto& v : vars_) {
            require(v.size >= 1, ErrorKind::invalid_input, "alphabet size must be >= 1");
            total *= std::size_t(v.size);
            require(total <= max_system_states, ErrorKind::size_cap, "product space exceeds 2^20 states");
        }
        require(joint_.size() == total, ErrorKind::invalid_input, "joint size does not match the product space");
        double s = 0.0;
        for (double v : joint_) {
            require(std::isfinite(v) && v >= 0.0, ErrorKind::invalid_input, "joint entries must be >= 0");
            s += v;
        }
        require(std::abs(s - 1.0) <= 1e-12 * std::max(1.0, double(total) / 64.0), ErrorKind::invalid_input,
                "joint must sum to 1");
        strides_.assign(vars_.size(), 1);
        for (std::size_t i = vars_.size(); i-- > 1;) strides_[i - 1] = strides_[i] * std::size_t(vars_[i].size);
    }

    /** Build from an unnormalised weight function on value tuples. */
    static FiniteSystem from_weights(std::vector<Variable> vars,
                                     const std::function<double(const std::vector<int>&)>& weight)
    {
        std::size_t total = 1;
        for (const auto& v : vars) {
            total *= std::size_t(std::max(v.size, 1));
            require(total <= max_system_states, ErrorKind::size_cap, "product space exceeds 2^20 states");
        }
        std::vector<double> w(total);
        std::vector<int> digits(vars.size(), 0);
        double s = 0.0;
        for (std::size_t st = 0; st < total; ++st) {
            w[st] = weight(digits);
            s += w[st];
            for (std::size_t i = vars.size(); i-- > 0;) {
                if (++digits[i] < vars[i].size) break;
                digits[i] = 0;
            }
        }
        require(s > 0.0, ErrorKind::invalid_input, "weights must have positive total");
        for (double& x : w) x /= s;
        return FiniteSystem(std::move(vars), std::move(w));
    }

    std::size_t num_vars() const { return vars_.size(); }
    std::size_t num_states() const { return joint_.size(); }
    const std::vector<Variable>& vars() const { return vars_; }
    const std::vector<double>& joint() const { return joint_; }
    double prob(std::size_t state) const { return joint_[state]; }
    std::size_t stride(std::size_t var) const { return strides_[var]; }
    int size(std::size_t var) const { return vars_[var].size; }

    int digit(std::size_t state, std::size_t var) const
    {
        return int((state / strides_[var]) % std::size_t(vars_[var].size));
    }

    std::vector<int> decode(std::size_t state) const
    {
        std::vector<int> d(vars_.size());
        for (std::size_t i = 0; i < vars_.size(); ++i) d[i] = digit(state, i);
        return d;
    }

    std::size_t encode(const std::vector<int>& digits) const
    {
        std::size_t s = 0;
        for (std::size_t i = 0; i < vars_.size(); ++i) s += std::size_t(digits[i]) * strides_[i];
        return s;
    }

    std::size_t block_size(const std::vector<int>& block) const
    {
        std::size_t n = 1;
        for (int v : block) n *= std::size_t(vars_[std::size_t(v)].size);
        return n;
    }

    /** Flattened index of the block's values (first listed variable slowest). */
    std::size_t block_index(std::size_t state, const std::vector<int>& block) const
    {
        std::size_t idx = 0;
        for (int v : block) idx = idx * std::size_t(vars_[std::size_t(v)].size) + std::size_t(digit(state, std::size_t(v)));
        return idx;
    }

private:
    std::vector<Variable> vars_;
    std::vector<double> joint_;
    std::vector<std::size_t> strides_;
};

namespace detail {

inline void check_block(const FiniteSystem& sys, const std::vector<int>& block, const char* name)
{
    require(!block.empty(), ErrorKind::invalid_input, std::string(name) + " must be non-empty");
    std::vector<int> s = block;
    std::sort(s.begin(), s.end());
    require(std::adjacent_find(s.begin(), s.end()) == s.end(), ErrorKind::invalid_input,
            std::string(name) + " has repeated variables");
    for (int v : s)
        require(v >= 0 && std::size_t(v) < sys.num_vars(), ErrorKind::invalid_input,
                std::string(name) + " references an unknown variable");
}

inline bool intersects(const std::vector<int>& a, const std::vector<int>& b)
{
    for (int x : a)
        if (std::find(b.begin(), b.end(), x) != b.end()) return true;
    return false;
}

} // namespace detail

/** Joint table of the flattened blocks (X_I, Y_J). */
inline Matrix pair_table(const FiniteSystem& sys, const std::vector<int>& I, const std::vector<int>& J)
{
    Matrix t = Matrix::Zero(Index(sys.block_size(I)), Index(sys.block_size(J)));
    for (std::size_t s = 0; s < sys.num_states(); ++s) {
        double p = sys.prob(s);
        if (p == 0.0) continue;
        t(Index(sys.block_index(s, I)), Index(sys.block_index(s, J))) += p;
    }
    return t;
}

/** Marginal law of a block as a flat vector. */
inline std::vector<double> block_marginal(const FiniteSystem& sys, const std::vector<int>& block)
{
    std::vector<double> m(sys.block_size(block), 0.0);
    for (std::size_t s = 0; s < sys.num_states(); ++s) m[sys.block_index(s, block)] += sys.prob(s);
    return m;
}

inline double maxcorr_blocks(const FiniteSystem& sys, const std::vector<int>& I, const std::vector<int>& J)
{
    detail::check_block(sys, I, "I");
    detail::check_block(sys, J, "J");
    require(!detail::intersects(I, J), ErrorKind::overlap, "I and J must be disjoint");
    return maxcorr_table(pair_table(sys, I, J)).rho;
}

struct SubjectiveReport {
    double value = 0.0;
    std::vector<int> conditioned;  ///< variables of the maximising conditioning
    std::vector<int> values;       ///< their values
};

inline constexpr std::size_t max_conditioning_pool = 12;

/**
 * Subjective maximal correlation: supremum over every subset K of the pool and every
 * positive-probability value of X_K of the conditional maximal correlation.
 */
inline SubjectiveReport subjective_maxcorr_detail(const FiniteSystem& sys, const std::vector<int>& I,
                                                  const std::vector<int>& J, const std::vector<int>& pool)
{
    detail::check_block(sys, I, "I");
    detail::check_block(sys, J, "J");
    require(!detail::intersects(I, J), ErrorKind::overlap, "I and J must be disjoint");
    require(!detail::intersects(I, pool) && !detail::intersects(J, pool), ErrorKind::overlap,
            "conditioning pool must not contain I or J");
    require(pool.size() <= max_conditioning_pool, ErrorKind::size_cap, "conditioning pool exceeds 12 variables");
    for (int v : pool)
        require(v >= 0 && std::size_t(v) < sys.num_vars(), ErrorKind::invalid_input, "pool references an unknown variable");

    const std::size_t nI = sys.block_size(I), nJ = sys.block_size(J), S = sys.num_states();
    std::vector<std::size_t> idxI(S), idxJ(S);
    for (std::size_t s = 0; s < S; ++s) {
        idxI[s] = sys.block_index(s, I);
        idxJ[s] = sys.block_index(s, J);
    }

    SubjectiveReport best;
    std::vector<double> table;
    const std::size_t subsets = std::size_t(1) << pool.size();
    for (std::size_t mask = 0; mask < subsets; ++mask) {
        std::vector<int> K;
        for (std::size_t b = 0; b < pool.size(); ++b)
            if (mask & (std::size_t(1) << b)) K.push_back(pool[b]);
        const std::size_t nK = sys.block_size(K);
        table.assign(nK * nI * nJ, 0.0);
        for (std::size_t s = 0; s < S; ++s) {
            double p = sys.prob(s);
            if (p == 0.0) continue;
            std::size_t k = K.empty() ? 0 : sys.block_index(s, K);
            table[(k * nI + idxI[s]) * nJ + idxJ[s]] += p;
        }
        for (std::size_t k = 0; k < nK; ++k) {
            Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> slice(
                table.data() + k * nI * nJ, Index(nI), Index(nJ));
            if (!(slice.sum() > 0.0)) continue;
            double r = maxcorr_table(Matrix(slice)).rho;
            if (r > best.value) {
                best.value = r;
                best.conditioned = K;
                best.values.clear();
                std::size_t rem = k;
                std::vector<int> vals(K.size());
                for (std::size_t q = K.size(); q-- > 0;) {
                    int sz = sys.size(std::size_t(K[q]));
                    vals[q] = int(rem % std::size_t(sz));
                    rem /= std::size_t(sz);
                }
                best.values = vals;
            }
        }
    }
    return best;
}

inline double subjective_maxcorr(const FiniteSystem& sys, const std::vector<int>& I, const std::vector<int>& J,
                                 const std::vector<int>& pool)
{
    return subjective_maxcorr_detail(sys, I, J, pool).value;
}

inline double subjective_maxcorr(const FiniteSystem& sys, int i, int j, const std::vector<int>& pool)
{
    return subjective_maxcorr_detail(sys, {i}, {j}, pool).value;
}

/** Every variable other than the listed ones. */
inline std::vector<int> complement_pool(const FiniteSystem& sys, const std::vector<int>& exclude)
{
    std::vector<int> out;
    for (int v = 0; v < int(sys.num_vars()); ++v)
        if (std::find(exclude.begin(), exclude.end(), v) == exclude.end()) out.push_back(v);
    return out;
}

// ---------------------------------------------------------------------------
// Mixing coefficients and event scans

struct MixingCoefficients {
    double alpha = 0.0;
    double beta = 0.0;
    double mutual_information = 0.0;
};

inline constexpr int max_event_alphabet = 20;

/** alpha = max over A of sum_b (P(A,b) - P(A) p^b)_+, scanning subsets of the smaller side. */
inline double alpha_mixing(const Matrix& joint)
{
    const bool rows_small = joint.rows() <= joint.cols();
    Matrix p = rows_small ? joint : Matrix(joint.transpose());
    const Index N = p.rows(), M = p.cols();
    require(N <= max_event_alphabet, ErrorKind::size_cap, "alpha scan needs an alphabet of at most 20 states");
    Vector py = col_marginal(p), px = row_marginal(p);
    Vector r = Vector::Zero(M);
    double pa = 0.0, best = 0.0;
    const std::uint64_t total = std::uint64_t(1) << N;
    std::uint64_t gray_prev = 0;
    for (std::uint64_t k = 1; k < total; ++k) {
        std::uint64_t g = k ^ (k >> 1);
        std::uint64_t diff = g ^ gray_prev;
        int a = __builtin_ctzll(diff);
        double sgn = (g & diff) ? 1.0 : -1.0;
        r += sgn * p.row(a).transpose();
        pa += sgn * px(a);
        gray_prev = g;
        double v = 0.0;
        for (Index b = 0; b < M; ++b) v += std::max(0.0, r(b) - pa * py(b));
        best = std::max(best, v);
    }
    return best;
}

inline MixingCoefficients mixing_coefficients(const FinitePair& pair)
{
    validate(pair);
    const Matrix& p = pair.joint;
    Vector px = row_marginal(p), py = col_marginal(p);
    MixingCoefficients out;
    out.alpha = alpha_mixing(p);
    double b = 0.0, I = 0.0;
    for (Index a = 0; a < p.rows(); ++a)
        for (Index c = 0; c < p.cols(); ++c) {
            double q = px(a) * py(c);
            b += std::abs(p(a, c) - q);
            if (p(a, c) > 0.0) I += p(a, c) * std::log(p(a, c) / q);
        }
    out.beta = 0.5 * b;
    out.mutual_information = std::max(0.0, I);
    return out;
}

struct EventExtremes {
    double max_ratio = 0.0;
    std::vector<bool> event_a;
    std::vector<bool> event_b;
};

inline double event_ratio(const Matrix& p, const std::vector<bool>& A, const std::vector<bool>& B)
{
    double pab = 0.0, pa = 0.0, pb = 0.0;
    for (Index a = 0; a < p.rows(); ++a)
        for (Index b = 0; b < p.cols(); ++b) {
            if (A[std::size_t(a)]) pa += p(a, b);
            if (B[std::size_t(b)]) pb += p(a, b);
            if (A[std::size_t(a)] && B[std::size_t(b)]) pab += p(a, b);
        }
    double den = std::sqrt(pa * (1.0 - pa) * pb * (1.0 - pb));
    if (!(den > 0.0)) return 0.0;
    return std::abs(pab - pa * pb) / den;
}

/**
 * Exhaustive scan of nontrivial event pairs for the largest normalised covariance
 * |P[AB] - P[A]P[B]| / sqrt(P[A](1-P[A])P[B](1-P[B])). Complements are skipped
 * because the ratio is invariant under A -> A^c and B -> B^c.
 */
inline EventExtremes event_extremes(const FinitePair& pair)
{
    validate(pair);
    const Matrix& p = pair.joint;
    const Index N = p.rows(), M = p.cols();
    require(N <= max_event_alphabet && M <= max_event_alphabet, ErrorKind::size_cap,
            "event scan needs alphabets of at most 20 states");
    require(N + M <= 32, ErrorKind::size_cap, "event scan needs |X| + |Y| <= 32");
    EventExtremes out;
    out.event_a.assign(std::size_t(N), false);
    out.event_b.assign(std::size_t(M), false);
    if (N < 2 || M < 2) return out;
    Vector px = row_marginal(p), py = col_marginal(p);

    const std::uint64_t na = std::uint64_t(1) << (N - 1), nb = std::uint64_t(1) << (M - 1);
    Vector r = Vector::Zero(M);
    double pa = 0.0, best = -1.0;
    std::uint64_t bestA = 0, bestB = 0, ga_prev = 0;
    for (std::uint64_t ka = 1; ka < na; ++ka) {
        std::uint64_t ga = ka ^ (ka >> 1), da = ga ^ ga_prev;
        int a = __builtin_ctzll(da);
        double sa = (ga & da) ? 1.0 : -1.0;
        r += sa * p.row(a).transpose();
        pa += sa * px(a);
        ga_prev = ga;
        double va = pa * (1.0 - pa);
        if (!(va > 0.0)) continue;
        double cov = 0.0, pb = 0.0;
        std::uint64_t gb_prev = 0;
        for (std::uint64_t kb = 1; kb < nb; ++kb) {
            std::uint64_t gb = kb ^ (kb >> 1), db = gb ^ gb_prev;
            int b = __builtin_ctzll(db);
            double sb = (gb & db) ? 1.0 : -1.0;
            cov += sb * (r(b) - pa * py(b));
            pb += sb * py(b);
            gb_prev = gb;
            double vb = pb * (1.0 - pb);
            if (!(vb > 0.0)) continue;
            double ratio = std::abs(cov) / std::sqrt(va * vb);
            if (ratio > best) {
                best = ratio;
                bestA = ga;
                bestB = gb;
            }
        }
    }
    if (best < 0.0) return out;
    for (Index a = 0; a < N; ++a) out.event_a[std::size_t(a)] = (bestA >> a) & 1u;
    for (Index b = 0; b < M; ++b) out.event_b[std::size_t(b)] = (bestB >> b) & 1u;
    out.max_ratio = event_ratio(p, out.event_a, out.event_b);
    return out;
}

/** Chi-square type bound ||h - 1||_{L2(P_X x P_Y)} = Frobenius norm of the normalised joint. */
inline double density_bound(const FinitePair& pair)
{
    validate(pair);
    const Matrix& p = pair.joint;
    Vector px = row_marginal(p), py = col_marginal(p);
    for (Index a = 0; a < px.size(); ++a) require(px(a) > 0.0, ErrorKind::zero_marginal, "X marginal has a zero atom");
    for (Index b = 0; b < py.size(); ++b) require(py(b) > 0.0, ErrorKind::zero_marginal, "Y marginal has a zero atom");
    double s = 0.0;
    for (Index a = 0; a < p.rows(); ++a)
        for (Index b = 0; b < p.cols(); ++b) {
            double q = px(a) * py(b);
            s += sqr(p(a, b) - q) / q;
        }
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Stationary Markov chains

/** Layout of a transition matrix. */
enum class StochasticLayout {
    columns,  ///< P(a, b) = Pr[next = a | current = b]
    rows,     ///< P(a, b) = Pr[next = b | current = a]
};

struct MarkovReport {
    Vector stationary;
    std::vector<double> rho;          ///< rho[t-1] = {X_0 : X_t}, t = 1..k
    std::vector<double> product_bound;  ///< {X_0:X_1}^t
    bool reversible = false;
    double power_law_residual = 0.0;  ///< max_t |rho_t - rho_1^t| when reversible
};

/** Row-stochastic form (from-state on rows). */
inline Matrix to_row_stochastic(const Matrix& P, StochasticLayout layout)
{
    return layout == StochasticLayout::rows ? P : Matrix(P.transpose());
}

inline Vector stationary_law(const Matrix& T)
{
    const Index n = T.rows();
    require(T.cols() == n && n >= 1, ErrorKind::invalid_input, "transition matrix must be square");
    for (Index a = 0; a < n; ++a) {
        double s = 0.0;
        for (Index b = 0; b < n; ++b) {
            require(std::isfinite(T(a, b)) && T(a, b) >= 0.0, ErrorKind::invalid_input,
                    "transition probabilities must be >= 0");
            s += T(a, b);
        }
        require(std::abs(s - 1.0) <= 1e-12 * double(n), ErrorKind::invalid_input, "transition rows must sum to 1");
    }
    Matrix Id = Matrix::Identity(n, n);
    require(numerical_rank(T - Id, 1e-10) == n - 1, ErrorKind::non_ergodic,
            "chain does not have a unique stationary law");
    Matrix lazy = 0.5 * (Id + T);
    Vector pi = Vector::Constant(n, 1.0 / double(n));
    for (int it = 0; it < 1000000; ++it) {
        Vector next = lazy.transpose() * pi;
        next /= next.sum();
        double d = (next - pi).lpNorm<1>();
        pi = next;
        if (d < 1e-15) break;
    }
    return pi;
}

inline Matrix k_step_joint(const Matrix& T, const Vector& pi, int k)
{
    Matrix Tk = Matrix::Identity(T.rows(), T.cols());
    for (int i = 0; i < k; ++i) Tk = Tk * T;
    return pi.asDiagonal() * Tk;
}

inline MarkovReport markov_chain_checks(const Matrix& P, int k, StochasticLayout layout = StochasticLayout::columns)
{
    require(k >= 1, ErrorKind::invalid_input, "steps must be >= 1");
    Matrix T = to_row_stochastic(P, layout);
    MarkovReport out;
    out.stationary = stationary_law(T);
    const Vector& pi = out.stationary;
    double asym = 0.0;
    for (Index a = 0; a < T.rows(); ++a)
        for (Index b = 0; b < T.cols(); ++b) asym = std::max(asym, std::abs(pi(a) * T(a, b) - pi(b) * T(b, a)));
    out.reversible = asym <= 1e-12;
    Matrix Tk = Matrix::Identity(T.rows(), T.cols());
    for (int t = 1; t <= k; ++t) {
        Tk = Tk * T;
        Matrix joint = pi.asDiagonal() * Tk;
        out.rho.push_back(maxcorr_table(joint).rho);
    }
    for (int t = 1; t <= k; ++t) out.product_bound.push_back(std::pow(out.rho[0], t));
    if (out.reversible) {
        for (int t = 1; t <= k; ++t)
            out.power_law_residual =
                std::max(out.power_law_residual, std::abs(out.rho[std::size_t(t - 1)] - out.product_bound[std::size_t(t - 1)]));
        require(out.power_law_residual <= 1e-9, ErrorKind::undefined,
                "reversible chain violates the power law for the maximal correlation");
    }
    return out;
}

} // namespace rhomix
