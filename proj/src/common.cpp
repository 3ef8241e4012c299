#include "spectracontrol/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace spectracontrol {

XNorm parse_xnorm(const std::string& text) {
    if (text == "1") return XNorm::One;
    if (text == "2") return XNorm::Two;
    if (text == "inf" || text == "infinity" || text == "Inf") return XNorm::Inf;
    throw ValidationError("x_norm_q must be one of 1, 2, inf (got '" + text + "')");
}

std::string to_string(XNorm q) {
    switch (q) {
        case XNorm::One: return "1";
        case XNorm::Two: return "2";
        case XNorm::Inf: return "inf";
    }
    return "?";
}

Real xnorm_exponent(XNorm q) {
    switch (q) {
        case XNorm::One: return 1.0;
        case XNorm::Two: return 2.0;
        case XNorm::Inf: return kInf;
    }
    return 2.0;
}

XNorm dual(XNorm q) {
    switch (q) {
        case XNorm::One: return XNorm::Inf;
        case XNorm::Two: return XNorm::Two;
        case XNorm::Inf: return XNorm::One;
    }
    return XNorm::Two;
}

Real holder_conjugate(Real p) {
    if (!(p >= 1.0)) throw ValidationError("exponent must lie in [1, inf]");
    if (p == 1.0) return kInf;
    if (std::isinf(p)) return 1.0;
    return p / (p - 1.0);
}

int order(const MultiIndex& alpha) {
    int s = 0;
    for (int a : alpha) s += a;
    return s;
}

namespace {
void enumerate_exact(int d, int total, MultiIndex& cur, int axis, std::vector<MultiIndex>& out) {
    if (axis == d - 1) {
        cur[axis] = total;
        out.push_back(cur);
        return;
    }
    for (int k = total; k >= 0; --k) {
        cur[axis] = k;
        enumerate_exact(d, total - k, cur, axis + 1, out);
    }
}
}  // namespace

std::vector<MultiIndex> multi_indices_up_to(int d, int max_order, bool include_zero) {
    std::vector<MultiIndex> out;
    MultiIndex cur(static_cast<std::size_t>(d), 0);
    for (int k = include_zero ? 0 : 1; k <= max_order; ++k) enumerate_exact(d, k, cur, 0, out);
    return out;
}

bool leq(const MultiIndex& beta, const MultiIndex& alpha) {
    for (std::size_t i = 0; i < alpha.size(); ++i)
        if (beta[i] > alpha[i]) return false;
    return true;
}

Real vector_norm(std::span<const Complex> v, XNorm q) {
    Real acc = 0.0;
    switch (q) {
        case XNorm::One:
            for (const auto& z : v) acc += std::abs(z);
            return acc;
        case XNorm::Two:
            for (const auto& z : v) acc += std::norm(z);
            return std::sqrt(acc);
        case XNorm::Inf:
            for (const auto& z : v) acc = std::max(acc, std::abs(z));
            return acc;
    }
    return acc;
}

Real vector_norm(const CVector& v, XNorm q) {
    return vector_norm(std::span<const Complex>(v.data(), static_cast<std::size_t>(v.size())), q);
}

Real operator_norm(const CMatrix& m, XNorm q) {
    if (m.size() == 0) return 0.0;
    switch (q) {
        case XNorm::One: return m.cwiseAbs().colwise().sum().maxCoeff();
        case XNorm::Inf: return m.cwiseAbs().rowwise().sum().maxCoeff();
        case XNorm::Two:
            if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
            return Eigen::JacobiSVD<CMatrix>(m).singularValues()(0);
    }
    return 0.0;
}

Real inverse_norm(const CMatrix& m, XNorm q) {
    if (m.rows() == 1 && m.cols() == 1) {
        const Real a = std::abs(m(0, 0));
        return a == 0.0 ? kInf : 1.0 / a;
    }
    if (q == XNorm::Two) {
        const auto sv = Eigen::JacobiSVD<CMatrix>(m).singularValues();
        const Real smin = sv(sv.size() - 1);
        if (smin <= 1e-15 * sv(0) || smin == 0.0) return kInf;
        return 1.0 / smin;
    }
    Eigen::FullPivLU<CMatrix> lu(m);
    if (!lu.isInvertible() || lu.rcond() < 1e-15) return kInf;
    return operator_norm(lu.inverse(), q);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ull))) {}

std::uint64_t CounterRng::next_u64() { return splitmix64(key_ + 0x9E3779B97F4A7C15ull * (++counter_)); }

Real CounterRng::uniform() { return static_cast<Real>(next_u64() >> 11) * 0x1.0p-53; }

Real CounterRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    Real u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const Real u2 = uniform();
    const Real r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
}

Complex CounterRng::complex_normal() {
    const Real s = std::sqrt(0.5);
    const Real re = normal();
    const Real im = normal();
    return {s * re, s * im};
}

std::uint64_t CounterRng::below(std::uint64_t bound) {
    if (bound == 0) return 0;
    // Rejection keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
}

unsigned worker_count() {
    if (const char* env = std::getenv("SPECTRACONTROL_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(worker_count(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace spectracontrol
