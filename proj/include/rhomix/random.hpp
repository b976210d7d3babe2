#pragma once

#include "discrete.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace rhomix {

/** SplitMix64 step; used to derive independent per-replica seeds from one master seed. */
inline std::uint64_t splitmix64(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/** Seed of replica `r` under master seed `master`. */
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t r)
{
    std::uint64_t s = master ^ (0xD1B54A32D192ED03ull * (r + 1));
    return splitmix64(s);
}

inline double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

/**
 * Random system with `n` variables of alphabet sizes drawn from [2, max_alphabet].
 * Weights are exp(s * gaussian) so that dependence strength varies with `s`;
 * a fraction of draws zero out single cells to exercise degenerate supports.
 */
inline FiniteSystem random_system(std::mt19937_64& rng, int n, int max_alphabet, double s = 1.0,
                                  double zero_fraction = 0.0)
{
    std::uniform_int_distribution<int> size(2, std::max(2, max_alphabet));
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Variable> vars;
    for (int i = 0; i < n; ++i) vars.push_back({"X" + std::to_string(i + 1), size(rng)});
    return FiniteSystem::from_weights(vars, [&](const std::vector<int>&) {
        if (zero_fraction > 0.0 && uniform01(rng) < zero_fraction) return 0.0;
        return std::exp(s * g(rng));
    });
}

/** Product of independent random marginals. */
inline FiniteSystem random_product_system(std::mt19937_64& rng, int n, int max_alphabet)
{
    std::uniform_int_distribution<int> size(2, std::max(2, max_alphabet));
    std::vector<Variable> vars;
    std::vector<std::vector<double>> marg;
    for (int i = 0; i < n; ++i) {
        vars.push_back({"X" + std::to_string(i + 1), size(rng)});
        std::vector<double> m(std::size_t(vars.back().size));
        for (double& v : m) v = 0.1 + uniform01(rng);
        marg.push_back(m);
    }
    return FiniteSystem::from_weights(vars, [&](const std::vector<int>& d) {
        double w = 1.0;
        for (std::size_t i = 0; i < d.size(); ++i) w *= marg[i][std::size_t(d[i])];
        return w;
    });
}

/** @brief Independent pairs (X_i, Y_i): variables X1..Xk then Y1..Yk. */
struct PairProduct {
    FiniteSystem system;
    std::vector<Matrix> pair_joints;
};

inline PairProduct random_pair_product_system(std::mt19937_64& rng, int pairs, int max_alphabet, double s = 1.0)
{
    std::uniform_int_distribution<int> size(2, std::max(2, max_alphabet));
    std::normal_distribution<double> g(0.0, 1.0);
    PairProduct out;
    std::vector<Variable> vars(std::size_t(2 * pairs));
    for (int i = 0; i < pairs; ++i) {
        int a = size(rng), b = size(rng);
        vars[std::size_t(i)] = {"X" + std::to_string(i + 1), a};
        vars[std::size_t(pairs + i)] = {"Y" + std::to_string(i + 1), b};
        Matrix J(a, b);
        for (Index r = 0; r < a; ++r)
            for (Index c = 0; c < b; ++c) J(r, c) = std::exp(s * g(rng));
        out.pair_joints.push_back(J / J.sum());
    }
    out.system = FiniteSystem::from_weights(vars, [&](const std::vector<int>& d) {
        double w = 1.0;
        for (int i = 0; i < pairs; ++i)
            w *= out.pair_joints[std::size_t(i)](d[std::size_t(i)], d[std::size_t(pairs + i)]);
        return w;
    });
    return out;
}

} // namespace rhomix
