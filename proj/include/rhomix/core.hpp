#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rhomix {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class ErrorKind {
    invalid_input,
    size_cap,
    overlap,
    zero_marginal,
    non_ergodic,
    undefined,
    no_valid_spacing,
    integrator,
    boundary,
    tail_missing,
    collinear,
    factor_too_large,
    grid_too_coarse,
    budget,
    distribution_mismatch,
};

inline const char* kind_name(ErrorKind k)
{
    switch (k) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::size_cap: return "size_cap";
    case ErrorKind::overlap: return "overlap";
    case ErrorKind::zero_marginal: return "zero_marginal";
    case ErrorKind::non_ergodic: return "non_ergodic";
    case ErrorKind::undefined: return "undefined";
    case ErrorKind::no_valid_spacing: return "no_valid_spacing";
    case ErrorKind::integrator: return "integrator";
    case ErrorKind::boundary: return "boundary";
    case ErrorKind::tail_missing: return "tail_missing";
    case ErrorKind::collinear: return "collinear";
    case ErrorKind::factor_too_large: return "factor_too_large";
    case ErrorKind::grid_too_coarse: return "grid_too_coarse";
    case ErrorKind::budget: return "budget";
    case ErrorKind::distribution_mismatch: return "distribution_mismatch";
    }
    return "unknown";
}

/** @brief Library error carrying the violated invariant. */
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(kind_name(kind)) + ": " + what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool ok, ErrorKind kind, const std::string& what)
{
    if (!ok) throw Error(kind, what);
}

namespace tol {
inline constexpr double probability_sum = 1e-12;
inline constexpr double symmetric = 1e-12;
inline constexpr double psd = 1e-10;
inline constexpr double rank_cutoff = 1e-10;
inline constexpr double power_iteration = 1e-10;
} // namespace tol

inline double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

inline double sqr(double x) { return x * x; }

/** Compensated summation. */
template <typename T = double>
class KahanSum {
public:
    void add(T x)
    {
        T y = x - c_;
        T t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    T value() const { return s_; }

private:
    T s_{0};
    T c_{0};
};

} // namespace rhomix
