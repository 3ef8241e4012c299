#include "spectracontrol/propagator.hpp"

#include "spectracontrol/matrix_exp.hpp"
#include "spectracontrol/plateau.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <list>
#include <map>
#include <mutex>
#include <numeric>

namespace spectracontrol {

namespace {

Real euclidean(std::span<const Real> xi) {
    Real s = 0.0;
    for (Real v : xi) s += v * v;
    return std::sqrt(s);
}

/// Least-squares slope of y against x.
Real ls_slope(std::span<const Real> x, std::span<const Real> y) {
    const auto n = static_cast<Real>(x.size());
    if (x.size() < 2) return 0.0;
    const Real mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const Real my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    Real sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

Real coefficient_l2(std::span<const Complex> c) {
    Real s = 0.0;
    for (const auto& z : c) s += std::norm(z);
    return std::sqrt(s);
}

}  // namespace

// ---------------------------------------------------------------------------
// FrequencyMultiplier

std::vector<Complex> FrequencyMultiplier::apply(std::span<const Complex> c) const {
    const auto n = static_cast<std::size_t>(grid.value_dim);
    if (c.size() != grid.samples()) throw ValidationError("multiplier: coefficient array has wrong size");
    std::vector<Complex> out(c.size());
    if (n == 1) {
        for (std::size_t k = 0; k < blocks.size(); ++k) out[k] = blocks[k](0, 0) * c[k];
        return out;
    }
    const auto ni = static_cast<Eigen::Index>(n);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        Eigen::Map<const CVector> in(c.data() + k * n, ni);
        Eigen::Map<CVector>(out.data() + k * n, ni) = blocks[k] * in;
    }
    return out;
}

std::vector<Complex> FrequencyMultiplier::apply_hilbert_adjoint(std::span<const Complex> c) const {
    const auto n = static_cast<std::size_t>(grid.value_dim);
    if (c.size() != grid.samples()) throw ValidationError("multiplier: coefficient array has wrong size");
    std::vector<Complex> out(c.size());
    if (n == 1) {
        for (std::size_t k = 0; k < blocks.size(); ++k) out[k] = std::conj(blocks[k](0, 0)) * c[k];
        return out;
    }
    const auto ni = static_cast<Eigen::Index>(n);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        Eigen::Map<const CVector> in(c.data() + k * n, ni);
        Eigen::Map<CVector>(out.data() + k * n, ni) = blocks[k].adjoint() * in;
    }
    return out;
}

std::vector<Complex> FrequencyMultiplier::apply_transpose(std::span<const Complex> c) const {
    const auto n = static_cast<std::size_t>(grid.value_dim);
    if (c.size() != grid.samples()) throw ValidationError("multiplier: coefficient array has wrong size");
    std::vector<Complex> out(c.size());
    const auto ni = static_cast<Eigen::Index>(n);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const CMatrix& B = blocks[grid.mirror(k)];
        if (n == 1) {
            out[k] = B(0, 0) * c[k];
        } else {
            Eigen::Map<const CVector> in(c.data() + k * n, ni);
            Eigen::Map<CVector>(out.data() + k * n, ni) = B.transpose() * in;
        }
    }
    return out;
}

SpectralField FrequencyMultiplier::apply(const SpectralField& f) const {
    if (!(f.grid() == grid)) throw ValidationError("multiplier: field lives on a different grid");
    return SpectralField::from_coefficients(grid, apply(f.coefficients()), f.band());
}

// ---------------------------------------------------------------------------
// Propagator

CMatrix propagator_matrix(const OperatorSymbol& symbol, std::span<const Real> xi, Real t) {
    return exp_scaled(-symbol.evaluate(xi), t);
}

Propagator::Propagator(const OperatorSymbol& symbol, const GridSpec& grid, Real t) : t_(t) {
    grid.validate();
    if (!(t >= 0.0)) throw ValidationError("propagator: t must be >= 0");
    if (grid.dim != symbol.dim() || grid.value_dim != symbol.value_dim())
        throw ValidationError("propagator: symbol and grid dimensions differ");
    mult_.grid = grid;
    mult_.blocks.resize(grid.cells());
    parallel_for(grid.cells(), [&](std::size_t k) {
        mult_.blocks[k] = propagator_matrix(symbol, grid.frequency(k), t);
    });
}

SpectralField Propagator::apply(const SpectralField& f) const { return mult_.apply(f); }

SpectralField Propagator::apply_transpose(const SpectralField& f) const {
    if (!(f.grid() == mult_.grid)) throw ValidationError("propagator: field lives on a different grid");
    return SpectralField::from_coefficients(mult_.grid, mult_.apply_transpose(f.coefficients()), f.band());
}

SpectralField Propagator::apply_hilbert_adjoint(const SpectralField& f) const {
    if (!(f.grid() == mult_.grid)) throw ValidationError("propagator: field lives on a different grid");
    return SpectralField::from_coefficients(mult_.grid, mult_.apply_hilbert_adjoint(f.coefficients()), f.band());
}

namespace {

constexpr std::size_t kCacheCapacity = 128;

struct PropagatorCache {
    std::mutex mutex;
    std::list<std::pair<std::string, std::shared_ptr<const Propagator>>> entries;  // most recent first
    std::map<std::string, decltype(entries)::iterator> index;
};

PropagatorCache& cache() {
    static PropagatorCache c;
    return c;
}

std::string cache_key(const OperatorSymbol& symbol, const GridSpec& g, Real t) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "#%d:%d:%a:%d:%a", g.dim, g.points, g.period, g.value_dim, t);
    return symbol.fingerprint() + buf;
}

}  // namespace

std::shared_ptr<const Propagator> propagator_for(const OperatorSymbol& symbol, const GridSpec& grid, Real t) {
    const auto key = cache_key(symbol, grid, t);
    auto& c = cache();
    {
        std::lock_guard lock(c.mutex);
        if (auto it = c.index.find(key); it != c.index.end()) {
            c.entries.splice(c.entries.begin(), c.entries, it->second);
            return it->second->second;
        }
    }
    auto made = std::make_shared<const Propagator>(symbol, grid, t);
    std::lock_guard lock(c.mutex);
    if (auto it = c.index.find(key); it != c.index.end()) return it->second->second;
    c.entries.emplace_front(key, made);
    c.index[key] = c.entries.begin();
    while (c.entries.size() > kCacheCapacity) {
        c.index.erase(c.entries.back().first);
        c.entries.pop_back();
    }
    return made;
}

void clear_propagator_cache() {
    auto& c = cache();
    std::lock_guard lock(c.mutex);
    c.entries.clear();
    c.index.clear();
}

SpectralField apply_propagator(const OperatorSymbol& symbol, const SpectralField& f, Real t) {
    return propagator_for(symbol, f.grid(), t)->apply(f);
}

SpectralField adjoint_propagator(const OperatorSymbol& symbol, const SpectralField& f, Real t) {
    return propagator_for(symbol, f.grid(), t)->apply_transpose(f);
}

SpectralField hilbert_adjoint_propagator(const OperatorSymbol& symbol, const SpectralField& f, Real t) {
    return propagator_for(symbol, f.grid(), t)->apply_hilbert_adjoint(f);
}

Complex bilinear_pairing(const SpectralField& f, const SpectralField& g) {
    if (!(f.grid() == g.grid())) throw ValidationError("pairing: fields live on different grids");
    Complex acc = 0.0;
    for (std::size_t i = 0; i < f.values().size(); ++i) acc += f.values()[i] * g.values()[i];
    return acc * f.grid().cell_measure();
}

Complex hilbert_pairing(const SpectralField& f, const SpectralField& g) {
    if (!(f.grid() == g.grid())) throw ValidationError("pairing: fields live on different grids");
    Complex acc = 0.0;
    for (std::size_t i = 0; i < f.values().size(); ++i) acc += std::conj(f.values()[i]) * g.values()[i];
    return acc * f.grid().cell_measure();
}

SpectralField apply_symbol(const OperatorSymbol& symbol, const SpectralField& f) {
    const auto& grid = f.grid();
    FrequencyMultiplier a{grid, std::vector<CMatrix>(grid.cells())};
    for (std::size_t k = 0; k < grid.cells(); ++k) a.blocks[k] = symbol.evaluate(grid.frequency(k));
    return a.apply(f);
}

// ---------------------------------------------------------------------------
// Cutoffs

Real CutoffSpec::chi(std::span<const Real> xi) const {
    if (!(lambda > 0.0)) throw ValidationError("cutoff: lambda must be positive");
    return plateau()(euclidean(xi) / lambda);
}

SpectralField apply_cutoff(const SpectralField& f, const CutoffSpec& spec, bool complement) {
    const auto& grid = f.grid();
    const auto n = static_cast<std::size_t>(grid.value_dim);
    std::vector<Complex> c(f.coefficients().begin(), f.coefficients().end());
    for (std::size_t k = 0; k < grid.cells(); ++k) {
        const Real chi = spec.chi(grid.frequency(k));
        const Real w = complement ? 1.0 - chi : chi;
        for (std::size_t j = 0; j < n; ++j) c[k * n + j] *= w;
    }
    return SpectralField::from_coefficients(grid, std::move(c), f.band());
}

// ---------------------------------------------------------------------------
// Finite differences

FiniteDifference fd_derivative(const std::function<CMatrix(std::span<const Real>)>& fn, std::span<const Real> xi,
                               const MultiIndex& alpha, Real h) {
    const std::size_t d = xi.size();
    if (alpha.size() != d) throw ValidationError("fd_derivative: alpha has wrong dimension");
    const int total = order(alpha);
    FiniteDifference out;
    if (total == 0) {
        out.value = fn(xi);
        return out;
    }
    Real fmax = 0.0;
    auto stencil = [&](Real step) {
        // Tensor product of the central |alpha_i|-th differences.
        std::vector<int> j(d, 0);
        CMatrix acc;
        std::vector<Real> point(d);
        while (true) {
            Real weight = 1.0;
            for (std::size_t i = 0; i < d; ++i) {
                Real binom = 1.0;
                for (int k = 1; k <= j[i]; ++k) binom = binom * (alpha[i] - k + 1) / k;
                weight *= (j[i] % 2 ? -1.0 : 1.0) * binom;
                point[i] = xi[i] + (0.5 * alpha[i] - j[i]) * step;
            }
            const CMatrix v = fn(point);
            fmax = std::max(fmax, v.cwiseAbs().maxCoeff());
            if (acc.size() == 0) acc = CMatrix::Zero(v.rows(), v.cols());
            acc += weight * v;
            std::size_t i = 0;
            while (i < d && ++j[i] > alpha[i]) j[i++] = 0;
            if (i == d) break;
        }
        return CMatrix(acc / std::pow(step, total));
    };
    const CMatrix coarse = stencil(h);
    const CMatrix fine = stencil(0.5 * h);
    out.value = (4.0 * fine - coarse) / 3.0;
    const Real diff = (fine - coarse).cwiseAbs().maxCoeff();
    const Real size = out.value.cwiseAbs().maxCoeff();
    const Real roundoff = 1e3 * std::numeric_limits<Real>::epsilon() * std::pow(2.0, total) * fmax / std::pow(0.5 * h, total);
    out.discrepancy = size > 0.0 ? diff / size : (diff > 0.0 ? kInf : 0.0);
    out.converged = diff <= 1e-2 * size + roundoff;
    return out;
}

// ---------------------------------------------------------------------------
// Probes

DecayProbe symbol_decay_probe(const OperatorSymbol& symbol, const EllipticityReport& report, const MultiIndex& alpha,
                              std::span<const Real> t_grid, const std::vector<std::vector<Real>>& xi_grid) {
    if (!report.pass || !report.perturbation) throw ValidationError("decay probe: requires a passing ellipticity report");
    DecayProbe probe;
    probe.alpha = alpha;
    probe.omega = report.perturbation->omega;
    probe.mu = report.perturbation->gamma / 2.0;
    const int m = symbol.order();
    for (Real t : t_grid) {
        if (!(t >= 0.0)) throw ValidationError("decay probe: t must be >= 0");
        for (const auto& xi : xi_grid) probe.rows.push_back({t, xi, 0.0, 0.0, 0.0, true});
    }
    parallel_for(probe.rows.size(), [&](std::size_t i) {
        auto& row = probe.rows[i];
        auto fn = [&](std::span<const Real> x) { return propagator_matrix(symbol, x, row.t); };
        const auto fd = fd_derivative(fn, row.xi, alpha, 1e-3 * (1.0 + euclidean(row.xi)));
        row.lhs = operator_norm(fd.value, report.q);
        row.converged = fd.converged;
        row.envelope = std::exp(probe.omega * row.t - probe.mu * std::pow(euclidean(row.xi), m) * row.t);
        row.ratio = row.envelope > 0.0 ? row.lhs / row.envelope : (row.lhs > 0.0 ? kInf : 0.0);
    });
    bool converged = true;
    for (const auto& row : probe.rows) {
        probe.K_alpha = std::max(probe.K_alpha, row.ratio);
        converged = converged && row.converged;
    }
    probe.holds = std::isfinite(probe.K_alpha) && converged;
    return probe;
}

Real parseval_norm(const FrequencyMultiplier& T) {
    Real best = 0.0;
    for (const auto& B : T.blocks) best = std::max(best, operator_norm(B, XNorm::Two));
    return best;
}

OperatorNormEstimate estimate_operator_norm(const FrequencyMultiplier& T, Real p, std::size_t starts, int max_iterations,
                                            std::uint64_t seed) {
    const auto& grid = T.grid;
    const bool hilbert = p == 2.0 && grid.x_norm == XNorm::Two;
    auto ratio_of = [&](std::span<const Complex> c, std::span<const Complex> tc) {
        if (hilbert) {
            const Real den = coefficient_l2(c);
            return den > 0.0 ? coefficient_l2(tc) / den : 0.0;
        }
        const Real den = lp_norm(grid, inverse_transform(grid, c), p);
        return den > 0.0 ? lp_norm(grid, inverse_transform(grid, tc), p) / den : 0.0;
    };
    std::vector<Real> best(starts, 0.0);
    std::vector<int> used(starts, 0);
    parallel_for(starts, [&](std::size_t s) {
        auto c = forward_transform(grid, white_noise(grid, seed + s).values());
        Real prev = -1.0;
        for (int it = 0; it <= max_iterations; ++it) {
            auto tc = T.apply(c);
            const Real r = ratio_of(c, tc);
            best[s] = std::max(best[s], r);
            used[s] = it;
            if (it == max_iterations || std::abs(r - prev) <= 1e-12 * std::max(r, 1e-300)) break;
            prev = r;
            c = T.apply_hilbert_adjoint(tc);
            const Real nrm = coefficient_l2(c);
            if (!(nrm > 0.0)) break;
            for (auto& z : c) z /= nrm;
        }
    });
    OperatorNormEstimate out;
    out.starts = starts;
    for (std::size_t s = 0; s < starts; ++s) {
        out.estimate = std::max(out.estimate, best[s]);
        out.iterations = std::max(out.iterations, used[s]);
    }
    return out;
}

namespace {

FrequencyMultiplier high_pass_propagator(const OperatorSymbol& symbol, const GridSpec& grid, Real lambda, Real t) {
    const auto prop = propagator_for(symbol, grid, t);
    FrequencyMultiplier T = prop->multiplier();
    const CutoffSpec spec{lambda};
    for (std::size_t k = 0; k < grid.cells(); ++k) T.blocks[k] *= 1.0 - spec.chi(grid.frequency(k));
    return T;
}

}  // namespace

DissipationProbe dissipation_probe(const OperatorSymbol& symbol, const GridSpec& grid, std::span<const Real> lambda_grid,
                                   std::span<const Real> t_grid, const DissipationOptions& options) {
    grid.validate();
    DissipationProbe probe;
    probe.p = grid.lp_exponent;
    probe.m = symbol.order();
    const bool exact = grid.lp_exponent == 2.0 && grid.x_norm == XNorm::Two;
    for (Real lambda : lambda_grid) {
        if (!(lambda > 0.0)) throw ValidationError("dissipation probe: lambda must be positive");
        if (lambda / 2.0 > grid.nyquist())
            throw ValidationError("dissipation probe: lambda/2 exceeds the Nyquist band of the grid");
        for (Real t : t_grid) {
            if (!(t >= 0.0)) throw ValidationError("dissipation probe: t must be >= 0");
            const auto T = high_pass_propagator(symbol, grid, lambda, t);
            DissipationRow row;
            row.t = t;
            row.lambda = lambda;
            row.estimate = estimate_operator_norm(T, grid.lp_exponent, options.ensemble, options.power_iterations,
                                                  options.seed).estimate;
            if (exact) row.exact = parseval_norm(T);
            probe.rows.push_back(row);
        }
    }

    std::vector<Real> lambdas(lambda_grid.begin(), lambda_grid.end());
    std::sort(lambdas.begin(), lambdas.end());
    lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
    for (Real l0 : lambdas) {
        Real c1 = 0.0;
        for (const auto& r : probe.rows)
            if (r.lambda >= l0) c1 = std::max(c1, r.estimate);
        if (!(c1 > 0.0)) continue;
        Real c2 = kInf;
        for (const auto& r : probe.rows) {
            if (r.lambda < l0 || r.t <= 0.0 || r.estimate <= 0.0) continue;
            c2 = std::min(c2, std::log(c1 / r.estimate) / (r.t * std::pow(r.lambda, probe.m)));
        }
        if (c2 > 0.0 && std::isfinite(c2)) {
            probe.c1 = c1;
            probe.c2 = c2;
            probe.lambda0 = l0;
            probe.fit_found = true;
            break;
        }
    }
    for (auto& r : probe.rows)
        r.bound = probe.fit_found ? probe.c1 * std::exp(-probe.c2 * r.t * std::pow(r.lambda, probe.m)) : kInf;
    return probe;
}

ExponentFit dissipation_exponent(const OperatorSymbol& symbol, const GridSpec& grid, std::span<const Real> lambda_grid,
                                 std::span<const Real> u_grid, const DissipationOptions& options) {
    if (lambda_grid.size() < 2 || u_grid.size() < 2)
        throw ValidationError("dissipation exponent: need at least two lambdas and two scaled times");
    const bool exact = grid.lp_exponent == 2.0 && grid.x_norm == XNorm::Two;
    const int m = symbol.order();
    ExponentFit fit;
    std::vector<Real> log_l, log_rate;
    for (Real lambda : lambda_grid) {
        std::vector<Real> ts, ys;
        for (Real u : u_grid) {
            const Real t = u / std::pow(lambda, m);
            const auto T = high_pass_propagator(symbol, grid, lambda, t);
            const Real norm = exact ? parseval_norm(T)
                                    : estimate_operator_norm(T, grid.lp_exponent, options.ensemble,
                                                             options.power_iterations, options.seed).estimate;
            if (!(norm > 0.0)) throw NumericalFailure("dissipation exponent: norm underflowed to zero; lower u");
            ts.push_back(t);
            ys.push_back(-std::log(norm));
        }
        const Real rate = ls_slope(ts, ys);
        fit.lambdas.push_back(lambda);
        fit.rates.push_back(rate);
        if (!(rate > 0.0)) throw NumericalFailure("dissipation exponent: non-positive decay rate");
        log_l.push_back(std::log(lambda));
        log_rate.push_back(std::log(rate));
    }
    fit.exponent = ls_slope(log_l, log_rate);
    return fit;
}

GeneratorCheck generator_check(const OperatorSymbol& symbol, const SpectralField& f, std::span<const Real> t_grid) {
    const auto& grid = f.grid();
    const Real p = grid.lp_exponent;
    const auto af = apply_symbol(symbol, f);
    GeneratorCheck out;
    const Real denom = lp_norm(af, p);
    if (!(denom > 1e-300)) {
        out.skipped = true;
        return out;
    }
    std::vector<Real> lt, lr;
    for (Real t : t_grid) {
        if (!(t > 0.0)) throw ValidationError("generator check: t must be > 0");
        const auto vt = apply_propagator(symbol, f, t);
        std::vector<Complex> diff(grid.samples());
        for (std::size_t i = 0; i < diff.size(); ++i)
            diff[i] = (vt.coefficients()[i] - f.coefficients()[i]) / t + af.coefficients()[i];
        const Real r = lp_norm(grid, inverse_transform(grid, diff), p) / denom;
        out.rows.push_back({t, r});
        out.C = std::max(out.C, r / t);
        if (r > 0.0) {
            lt.push_back(std::log(t));
            lr.push_back(std::log(r));
        }
    }
    out.order = ls_slope(lt, lr);
    return out;
}

MultiplierSeminorm multiplier_seminorm(const GridSpec& grid, const std::function<CMatrix(std::span<const Real>)>& m,
                                       Real eps) {
    grid.validate();
    if (!(eps > 0.0)) throw ValidationError("multiplier seminorm: eps must be positive");
    const int d = grid.dim;
    const auto alphas = multi_indices_up_to(d, d + 1, true);
    MultiplierSeminorm out;
    std::vector<Real> sob(grid.cells(), 0.0), dec(grid.cells(), 0.0);
    std::vector<CMatrix> samples(grid.cells());
    parallel_for(grid.cells(), [&](std::size_t k) {
        const auto xi = grid.frequency(k);
        const Real r = euclidean(xi);
        samples[k] = m(xi);
        for (const auto& alpha : alphas) {
            const Real v = operator_norm(fd_derivative(m, xi, alpha, 1e-3 * (1.0 + r)).value, grid.x_norm);
            sob[k] = std::max(sob[k], v);
            dec[k] = std::max(dec[k], std::pow(r, order(alpha) + eps) * v);
        }
    });
    out.sobolev = *std::max_element(sob.begin(), sob.end());
    out.decay = *std::max_element(dec.begin(), dec.end());
    out.mu = out.sobolev + out.decay;

    // Kernel entries K_ij(x) = Q^{-d} sum_xi m_ij(xi) e^{i xi.x}.
    const auto rows = samples.front().rows(), cols = samples.front().cols();
    GridSpec scalar = grid;
    scalar.value_dim = 1;
    std::vector<std::vector<Complex>> entries;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            std::vector<Complex> c(grid.cells());
            for (std::size_t k = 0; k < grid.cells(); ++k) c[k] = samples[k](i, j);
            entries.push_back(inverse_transform(scalar, c));
        }
    Real l1 = 0.0;
    CMatrix K(rows, cols);
    for (std::size_t x = 0; x < grid.cells(); ++x) {
        std::size_t e = 0;
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) K(i, j) = entries[e++][x];
        l1 += operator_norm(K, grid.x_norm);
    }
    out.kernel_l1 = l1 * grid.cell_measure();
    out.ratio = out.mu > 0.0 ? out.kernel_l1 / out.mu : 0.0;
    return out;
}

}  // namespace spectracontrol
