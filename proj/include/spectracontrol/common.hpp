#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spectracontrol {

using Real = double;
using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr Real kInf = std::numeric_limits<Real>::infinity();
inline constexpr Real kPi = 3.141592653589793238462643383279502884;

/// Raised for malformed inputs: unresolvable bands, misaligned widths, bad configs.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure cannot deliver its contract
/// (CG stagnation, singular resolvent, overflow).
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Norm on X = C^n. Only the exponents 1, 2 and infinity are supported.
enum class XNorm { One, Two, Inf };

XNorm parse_xnorm(const std::string& text);
std::string to_string(XNorm q);
Real xnorm_exponent(XNorm q);
/// Hoelder conjugate of q (1 <-> inf, 2 <-> 2).
XNorm dual(XNorm q);

/// Conjugate exponent of p in [1, inf].
Real holder_conjugate(Real p);

/// Multi-index alpha in N_0^d.
using MultiIndex = std::vector<int>;

int order(const MultiIndex& alpha);
/// All multi-indices of dimension d with 0 < |alpha| <= max_order, graded by order.
std::vector<MultiIndex> multi_indices_up_to(int d, int max_order, bool include_zero = false);
bool leq(const MultiIndex& beta, const MultiIndex& alpha);

/// ||v||_q for a contiguous block of n complex values.
Real vector_norm(std::span<const Complex> v, XNorm q);
Real vector_norm(const CVector& v, XNorm q);
/// Operator norm induced by ||.||_q. q = 2 uses the largest singular value.
Real operator_norm(const CMatrix& m, XNorm q);
/// ||m^{-1}||_q, or +inf when m is numerically singular.
Real inverse_norm(const CMatrix& m, XNorm q);

/// Counter-based generator: each draw is splitmix64(key + counter). Streams with
/// distinct ids are independent, and the sequence is identical on every platform.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    Real uniform();
    /// Standard normal via Box-Muller.
    Real normal();
    /// Complex normal with E|z|^2 = 1.
    Complex complex_normal();
    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    Real spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Worker count from SPECTRACONTROL_THREADS, else hardware concurrency.
unsigned worker_count();

/// Runs body(i) for i in [0, count). Each index is processed exactly once; callers
/// write results into per-index slots so the outcome does not depend on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace spectracontrol
