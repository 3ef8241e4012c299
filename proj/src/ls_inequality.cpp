#include "spectracontrol/ls_inequality.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "spectracontrol/plateau.hpp"

namespace spectracontrol {

// ---------------------------------------------------------------------------
// Spectral inequality probes

Real ls_bound(Real rho, Real K, int dim, Real L_dot_lambda) {
    return std::pow(rho / K, K * (dim + L_dot_lambda));
}

Real fit_ls_constant(Real ratio, Real rho, int dim, Real L_dot_lambda) {
    if (!(ratio > 0.0)) return kInf;
    const Real c = dim + L_dot_lambda;
    const Real target = std::log(ratio);
    // log bound(K) = K c (log rho - log K) is strictly decreasing for K >= 1, rho <= 1.
    auto log_bound = [&](Real K) { return K * c * (std::log(rho) - std::log(K)); };
    if (log_bound(1.0) <= target) return 1.0;
    Real lo = 1.0, hi = 2.0;
    while (log_bound(hi) > target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) return kInf;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
        const Real mid = 0.5 * (lo + hi);
        (log_bound(mid) <= target ? hi : lo) = mid;
    }
    return hi;
}

Real LSProbeResult::L_dot_lambda() const {
    Real s = 0.0;
    for (std::size_t i = 0; i < L.size(); ++i) s += L[i] * lambda[i];
    return s;
}

LSProbeResult ls_ratio(const SpectralField& f, const ThickSet& E) {
    if (!f.band()) throw ValidationError("ls_ratio: field must be band-limited");
    if (!E.certificate()) throw ValidationError("ls_ratio: thick set must be certified");
    if (!(f.grid() == E.grid())) throw ValidationError("ls_ratio: field and set live on different grids");
    const Real p = f.grid().lp_exponent;
    const Real full = lp_norm(f, p);
    if (!(full > 0.0)) throw ValidationError("ls_ratio: zero field");
    LSProbeResult r;
    r.ratio = lp_norm(f.grid(), f.values(), p, E.indicator()) / full;
    r.rho = E.certificate()->rho;
    r.L = E.certificate()->L;
    r.lambda = *f.band();
    r.dim = f.grid().dim;
    r.fitted_K = fit_ls_constant(r.ratio, r.rho, r.dim, r.L_dot_lambda());
    return r;
}

LSEnsemble ls_probe_ensemble(const GridSpec& grid, const ThickSet& E, std::span<const Real> lambda, int count,
                             std::uint64_t seed) {
    if (count < 1) throw ValidationError("ls ensemble: count must be >= 1");
    LSEnsemble out;
    out.samples.resize(static_cast<std::size_t>(count));
    parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
        out.samples[i] = ls_ratio(random_band_limited(grid, lambda, seed + i), E);
    });
    out.min_ratio = kInf;
    for (const auto& s : out.samples) {
        out.min_ratio = std::min(out.min_ratio, s.ratio);
        out.fitted_K = std::max(out.fitted_K, s.fitted_K);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bernstein constant

namespace {

constexpr Real kIndicatorHalfWidth = 0.75;
constexpr Real kMollifierRadius = 0.25;

/// H(w) = int eta(s) cos(w s) ds / Z and its derivative, eta the mollifier on (-1, 1).
class MollifierTransform {
public:
    explicit MollifierTransform(int resolution) {
        const int panels = 32 * resolution;
        const auto rule = gauss_legendre(32);
        Real mass = 0.0;
        for (int p = 0; p < panels; ++p) {
            const Real a = -1.0 + 2.0 * p / panels;
            const Real b = a + 2.0 / panels;
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                const Real s = 0.5 * (b - a) * rule.nodes[i] + 0.5 * (a + b);
                const Real w = 0.5 * (b - a) * rule.weights[i] * mollifier(s);
                if (w == 0.0) continue;
                nodes_.push_back(s);
                weights_.push_back(w);
                mass += w;
            }
        }
        for (auto& w : weights_) w /= mass;
    }

    Real value(Real w) const {
        Real acc = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) acc += weights_[i] * std::cos(w * nodes_[i]);
        return acc;
    }

    Real derivative(Real w) const {
        Real acc = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) acc -= weights_[i] * nodes_[i] * std::sin(w * nodes_[i]);
        return acc;
    }

private:
    std::vector<Real> nodes_;
    std::vector<Real> weights_;
};

/// g(x) = F^{-1} phi_1 (x) = sin(a x) / (pi x) * H(eps x) with a = 3/4, eps = 1/4.
Real plateau_kernel(const MollifierTransform& H, Real x) {
    const Real a = kIndicatorHalfWidth;
    const Real q = std::abs(x) < 1e-4 ? a - a * a * a * x * x / 6.0 : std::sin(a * x) / x;
    return q * H.value(kMollifierRadius * x) / kPi;
}

Real plateau_kernel_derivative(const MollifierTransform& H, Real x) {
    const Real a = kIndicatorHalfWidth;
    Real q, dq;
    if (std::abs(x) < 1e-4) {
        q = a - a * a * a * x * x / 6.0;
        dq = -a * a * a * x / 3.0;
    } else {
        q = std::sin(a * x) / x;
        dq = (a * x * std::cos(a * x) - std::sin(a * x)) / (x * x);
    }
    const Real eps = kMollifierRadius;
    return (dq * H.value(eps * x) + q * eps * H.derivative(eps * x)) / kPi;
}

/// 2 * int_0^X |F(x)| dx for an even |F|, integrating smoothly between bracketed zeros.
template <class Fn>
Real even_abs_integral(const Fn& F, int resolution) {
    constexpr Real kExtent = 1600.0;
    const Real step = 0.1 / resolution;
    const auto rule = gauss_legendre(24 * resolution);
    auto gl = [&](Real a, Real b) {
        Real acc = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i)
            acc += rule.weights[i] * std::abs(F(0.5 * (b - a) * rule.nodes[i] + 0.5 * (a + b)));
        return 0.5 * (b - a) * acc;
    };
    Real total = 0.0;
    Real left = 0.0;
    Real x0 = 0.0;
    Real f0 = F(step * 1e-3);
    const auto steps = static_cast<long>(kExtent / step);
    for (long i = 1; i <= steps; ++i) {
        const Real x1 = step * static_cast<Real>(i);
        const Real f1 = F(x1);
        if ((f0 < 0.0) != (f1 < 0.0) && f1 != 0.0) {
            Real a = x0, b = x1;
            Real fa = f0;
            for (int it = 0; it < 80 && b - a > 1e-15 * b; ++it) {
                const Real m = 0.5 * (a + b);
                const Real fm = F(m);
                if ((fm < 0.0) == (fa < 0.0)) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            const Real zero = 0.5 * (a + b);
            total += gl(left, zero);
            left = zero;
        }
        x0 = x1;
        f0 = f1;
    }
    total += gl(left, kExtent);
    return 2.0 * total;
}

struct C2Cache {
    std::mutex mutex;
    std::map<std::pair<int, int>, Real> values;
};

C2Cache& c2_cache() {
    static C2Cache cache;
    return cache;
}

}  // namespace

Real plateau_kernel_l1(int resolution) {
    auto& cache = c2_cache();
    {
        std::lock_guard lock(cache.mutex);
        if (auto it = cache.values.find({0, resolution}); it != cache.values.end()) return it->second;
    }
    const MollifierTransform H(resolution);
    const Real v = even_abs_integral([&](Real x) { return plateau_kernel(H, x); }, resolution);
    std::lock_guard lock(cache.mutex);
    cache.values[{0, resolution}] = v;
    return v;
}

Real compute_C2(int dim, int resolution) {
    if (dim < 1 || resolution < 1) throw ValidationError("compute_C2: dim and resolution must be >= 1");
    auto& cache = c2_cache();
    std::optional<Real> cached;
    {
        std::lock_guard lock(cache.mutex);
        if (auto it = cache.values.find({1, resolution}); it != cache.values.end()) cached = it->second;
    }
    if (!cached) {
        const MollifierTransform H(resolution);
        cached = even_abs_integral([&](Real x) { return plateau_kernel_derivative(H, x); }, resolution);
        std::lock_guard lock(cache.mutex);
        cache.values[{1, resolution}] = *cached;
    }
    // the kernel norm takes the same lock, so it is evaluated outside it
    return *cached * std::pow(dim > 1 ? plateau_kernel_l1(resolution) : 1.0, dim - 1);
}

BernsteinRecord bernstein_check(const SpectralField& f, const MultiIndex& alpha) {
    if (!f.band()) throw ValidationError("bernstein_check: field must be band-limited");
    const auto& grid = f.grid();
    const Real p = grid.lp_exponent;
    BernsteinRecord r;
    r.alpha = alpha;
    r.norm = lp_norm(f, p);
    if (!(r.norm > 0.0)) throw ValidationError("bernstein_check: zero field");
    r.lhs = lp_norm(spectral_derivative(f, alpha), p);
    const auto& lambda = *f.band();
    const Real C2 = compute_C2(grid.dim);
    Real general = r.norm, sharp = r.norm;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        general *= std::pow(C2 * lambda[i], alpha[i]);
        sharp *= std::pow(lambda[i] / 2.0, alpha[i]);
    }
    r.rhs = general;
    auto rel_slack = [&](Real bound) { return bound > 0.0 ? (bound - r.lhs) / bound : (r.lhs == 0.0 ? 0.0 : -kInf); };
    r.holds = rel_slack(general) >= -kBernsteinSlack;
    r.slack = rel_slack(general);
    if (p == 2.0) {
        r.sharp_rhs = sharp;
        r.sharp_holds = rel_slack(sharp) >= -kBernsteinSlack;
        r.slack = rel_slack(sharp);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Cubes

Real cube_constant_floor(int dim) { return 1.0 / (1.0 - std::pow(std::pow(2.0, dim) + 1.0, -1.0 / dim)); }

Real good_mass_constant(Real A, int dim, Real p) {
    if (std::isinf(p)) return 1.0;
    const Real inner = std::pow(2.0, -dim) * (std::pow(1.0 / (1.0 - 1.0 / A), dim) - 1.0);
    return 1.0 - std::pow(inner, 1.0 / p);
}

std::size_t CubeReport::good_count() const {
    return static_cast<std::size_t>(std::count_if(cubes.begin(), cubes.end(), [](const auto& c) { return c.good; }));
}

namespace {

struct CubeLayout {
    int per_axis = 0;        // unit cubes per axis (= Q)
    int cells_per_cube = 0;  // cells per axis within a cube (= N / Q)
    std::vector<std::size_t> cube_of_cell;
    std::size_t cube_count = 0;
};

CubeLayout cube_layout(const GridSpec& grid) {
    const Real Qr = std::round(grid.period);
    if (std::abs(grid.period - Qr) > 1e-12 * grid.period)
        throw ValidationError("cubes: the period Q must be an integer so unit cubes tile the torus");
    const int Q = static_cast<int>(Qr);
    if (grid.points % Q != 0) throw ValidationError("cubes: N must be a multiple of Q so cubes align with cells");
    CubeLayout layout;
    layout.per_axis = Q;
    layout.cells_per_cube = grid.points / Q;
    layout.cube_count = 1;
    for (int a = 0; a < grid.dim; ++a) layout.cube_count *= static_cast<std::size_t>(Q);
    layout.cube_of_cell.resize(grid.cells());
    std::vector<int> pos(static_cast<std::size_t>(grid.dim));
    for (std::size_t c = 0; c < grid.cells(); ++c) {
        grid.decode(c, pos);
        std::size_t k = 0;
        for (int a = 0; a < grid.dim; ++a)
            k = k * static_cast<std::size_t>(Q) + static_cast<std::size_t>(pos[static_cast<std::size_t>(a)] / layout.cells_per_cube);
        layout.cube_of_cell[c] = k;
    }
    return layout;
}

std::vector<int> cube_coordinates(std::size_t k, int dim, int per_axis) {
    std::vector<int> out(static_cast<std::size_t>(dim));
    for (int a = dim - 1; a >= 0; --a) {
        out[static_cast<std::size_t>(a)] = static_cast<int>(k % static_cast<std::size_t>(per_axis));
        k /= static_cast<std::size_t>(per_axis);
    }
    return out;
}

/// Per-cube L^p norms of a field (p = inf gives per-cube maxima).
std::vector<Real> per_cube_norms(const GridSpec& grid, std::span<const Complex> values, const CubeLayout& layout, Real p) {
    const auto n = static_cast<std::size_t>(grid.value_dim);
    std::vector<Real> acc(layout.cube_count, 0.0);
    std::vector<Real> peak(layout.cube_count, 0.0);
    std::vector<Real> pointwise(grid.cells());
    for (std::size_t c = 0; c < grid.cells(); ++c) {
        pointwise[c] = vector_norm(values.subspan(c * n, n), grid.x_norm);
        auto& pk = peak[layout.cube_of_cell[c]];
        pk = std::max(pk, pointwise[c]);
    }
    if (std::isinf(p)) return peak;
    for (std::size_t c = 0; c < grid.cells(); ++c) {
        const Real pk = peak[layout.cube_of_cell[c]];
        if (pk > 0.0) acc[layout.cube_of_cell[c]] += std::pow(pointwise[c] / pk, p);
    }
    for (std::size_t k = 0; k < layout.cube_count; ++k)
        acc[k] = peak[k] > 0.0 ? peak[k] * std::pow(acc[k] * grid.cell_measure(), 1.0 / p) : 0.0;
    return acc;
}

Real bernstein_weight(const MultiIndex& alpha, std::span<const Real> lambda, Real C2, Real base) {
    Real w = 1.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) w *= std::pow(base * C2 * lambda[i], alpha[i]);
    return w;
}

Real binomial(int n, int k) {
    Real r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

CubeReport classify_cubes(const SpectralField& f, Real A, int alpha_max) {
    if (!f.band()) throw ValidationError("classify_cubes: field must be band-limited");
    const auto& grid = f.grid();
    const int d = grid.dim;
    const Real floor = cube_constant_floor(d);
    if (!(A > floor)) throw ValidationError("classify_cubes: A must exceed 1/(1-(2^d+1)^{-1/d})");
    if (alpha_max < 1) throw ValidationError("classify_cubes: alpha_max must be >= 1");
    const auto layout = cube_layout(grid);
    const Real p = grid.lp_exponent;
    const auto& lambda = *f.band();
    const Real C2 = compute_C2(d);

    CubeReport report;
    report.A = A;
    report.C2 = C2;
    report.p = p;
    report.C3 = good_mass_constant(A, d, p);
    report.total_norm = lp_norm(f, p);

    const auto base_norms = per_cube_norms(grid, f.values(), layout, p);
    report.cubes.resize(layout.cube_count);
    for (std::size_t k = 0; k < layout.cube_count; ++k) {
        auto& c = report.cubes[k];
        c.cube = cube_coordinates(k, d, layout.per_axis);
        c.local_norm = base_norms[k];
        c.alpha_max = alpha_max;
    }
    const Real prefactor = std::pow(2.0, d);
    for (const auto& alpha : multi_indices_up_to(d, alpha_max)) {
        const auto deriv = spectral_derivative(f, alpha);
        const auto norms = per_cube_norms(grid, deriv.values(), layout, p);
        const Real weight = prefactor * bernstein_weight(alpha, lambda, C2, A);
        for (std::size_t k = 0; k < layout.cube_count; ++k) {
            auto& c = report.cubes[k];
            const Real rhs = weight * c.local_norm;
            const Real ratio = rhs > 0.0 ? norms[k] / rhs : (norms[k] > 0.0 ? kInf : 1.0);
            if (c.worst_alpha.empty() || ratio > c.worst_ratio) {
                c.worst_ratio = ratio;
                c.worst_alpha = alpha;
            }
            if (norms[k] >= rhs) c.good = false;
        }
    }

    std::vector<std::uint8_t> good_mask(grid.cells());
    for (std::size_t cell = 0; cell < grid.cells(); ++cell)
        good_mask[cell] = report.cubes[layout.cube_of_cell[cell]].good ? 1 : 0;
    report.good_norm = lp_norm(grid, f.values(), p, good_mask);
    report.good_mass_holds = report.good_norm >= report.C3 * report.total_norm * (1.0 - 1e-12);

    // Orders beyond alpha_max: sum over |alpha| = j > alpha_max of #alpha(j) * (2^d A^j)^{-p}.
    const Real pe = std::isinf(p) ? 1.0 : p;
    Real tail = 0.0;
    for (int j = alpha_max + 1; j < alpha_max + 2000; ++j) {
        const Real term = binomial(j + d - 1, d - 1) * std::pow(prefactor * std::pow(A, j), -pe);
        tail += term;
        if (term < 1e-18 * tail) break;
    }
    report.tail_bound = std::pow(tail, 1.0 / pe);
    return report;
}

PointBoundResult good_cube_point_bound(const SpectralField& f, std::span<const int> cube, Real B, int alpha_max) {
    if (!f.band()) throw ValidationError("good_cube_point_bound: field must be band-limited");
    const auto& grid = f.grid();
    const int d = grid.dim;
    if (cube.size() != static_cast<std::size_t>(d)) throw ValidationError("good_cube_point_bound: cube index dimension");
    const auto layout = cube_layout(grid);
    std::size_t k = 0;
    for (int a = 0; a < d; ++a) {
        int c = cube[static_cast<std::size_t>(a)] % layout.per_axis;
        if (c < 0) c += layout.per_axis;
        k = k * static_cast<std::size_t>(layout.per_axis) + static_cast<std::size_t>(c);
    }
    const Real p = grid.lp_exponent;
    const auto& lambda = *f.band();
    const Real C2 = compute_C2(d);
    const auto norms = per_cube_norms(grid, f.values(), layout, p);
    const Real local = norms[k];
    const Real prefactor = std::pow(4.0, d);
    const auto n = static_cast<std::size_t>(grid.value_dim);

    std::vector<std::size_t> members;
    for (std::size_t cell = 0; cell < grid.cells(); ++cell)
        if (layout.cube_of_cell[cell] == k) members.push_back(cell);
    std::vector<Real> worst(members.size(), 0.0);
    for (const auto& alpha : multi_indices_up_to(d, alpha_max, true)) {
        const auto deriv = order(alpha) == 0 ? f : spectral_derivative(f, alpha);
        const Real rhs = prefactor * bernstein_weight(alpha, lambda, C2, B) * local;
        for (std::size_t m = 0; m < members.size(); ++m) {
            const Real lhs = vector_norm(deriv.values().subspan(members[m] * n, n), grid.x_norm);
            const Real ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? kInf : 0.0);
            worst[m] = std::max(worst[m], ratio);
        }
    }
    PointBoundResult result;
    result.best_ratio = kInf;
    for (std::size_t m = 0; m < members.size(); ++m) {
        if (worst[m] < result.best_ratio) {
            result.best_ratio = worst[m];
            result.witness_cell = members[m];
        }
    }
    result.found = result.best_ratio <= 1.0;
    return result;
}

// ---------------------------------------------------------------------------
// Remez-type lemma

namespace {

CVector eval_polynomial(const std::vector<CVector>& coefficients, Complex z) {
    CVector acc = coefficients.back();
    for (std::size_t j = coefficients.size() - 1; j-- > 0;) acc = (acc * z + coefficients[j]).eval();
    return acc;
}

Real sup_on_interval(const std::vector<CVector>& coefficients, XNorm q, Interval iv, int samples) {
    Real best = 0.0;
    for (int i = 0; i <= samples; ++i) {
        const Real x = iv.lo + iv.length() * i / samples;
        best = std::max(best, vector_norm(eval_polynomial(coefficients, x), q));
    }
    return best;
}

}  // namespace

RemezResult remez_probe(const std::vector<CVector>& coefficients, XNorm q, Interval I, std::vector<Interval> A,
                        int boundary_samples) {
    if (coefficients.empty()) throw ValidationError("remez_probe: empty polynomial");
    if (std::abs(I.length() - 1.0) > 1e-12 || I.lo > 0.0 || I.hi < 0.0)
        throw ValidationError("remez_probe: I must be a closed unit interval containing 0");
    std::sort(A.begin(), A.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> merged;
    for (auto iv : A) {
        iv.lo = std::max(iv.lo, I.lo);
        iv.hi = std::min(iv.hi, I.hi);
        if (iv.hi <= iv.lo) continue;
        if (!merged.empty() && iv.lo <= merged.back().hi)
            merged.back().hi = std::max(merged.back().hi, iv.hi);
        else
            merged.push_back(iv);
    }
    Real measure = 0.0;
    for (const auto& iv : merged) measure += iv.length();
    if (!(measure > 0.0)) throw ValidationError("remez_probe: A has measure zero");

    RemezResult r;
    r.measure_A = measure;
    r.sup_I = sup_on_interval(coefficients, q, I, 8192);
    if (!(r.sup_I > 0.0)) throw ValidationError("remez_probe: polynomial vanishes on I");
    Real sup_A = 0.0;
    for (const auto& iv : merged)
        sup_A = std::max(sup_A, sup_on_interval(coefficients, q, iv, std::max(64, static_cast<int>(8192 * iv.length()))));
    r.sup_A = sup_A / r.sup_I;
    // The norm of an analytic C^n-valued function is subharmonic: its sup over the
    // closed disc of radius 5 is attained on the boundary circle.
    Real M = 0.0;
    for (int i = 0; i < boundary_samples; ++i) {
        const Real t = 2.0 * kPi * i / boundary_samples;
        M = std::max(M, vector_norm(eval_polynomial(coefficients, std::polar(5.0, t)), q));
    }
    r.M = std::max(1.0, M / r.sup_I);
    r.exponent = std::log(r.M) / std::log(2.0);
    if (r.exponent <= 1e-14)
        r.fitted_C1 = r.sup_A >= 1.0 - 1e-12 ? measure : kInf;
    else
        r.fitted_C1 = measure * std::pow(r.sup_A, -1.0 / r.exponent);
    return r;
}

}  // namespace spectracontrol
