#include "spectracontrol/elliptic_symbols.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace spectracontrol {

namespace {

std::vector<Real> log_space(Real lo, Real hi, std::size_t count) {
    std::vector<Real> out(count);
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    const Real a = std::log(lo), b = std::log(hi);
    for (std::size_t i = 0; i < count; ++i) out[i] = std::exp(a + (b - a) * static_cast<Real>(i) / static_cast<Real>(count - 1));
    return out;
}

Real euclidean(std::span<const Real> xi) {
    Real s = 0.0;
    for (Real v : xi) s += v * v;
    return std::sqrt(s);
}

std::string hex(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// OperatorSymbol

OperatorSymbol::OperatorSymbol(int order, int dim, int value_dim, std::vector<SymbolTerm> terms)
    : OperatorSymbol(order, dim, value_dim, std::move(terms), false) {}

OperatorSymbol::OperatorSymbol(int order, int dim, int value_dim, std::vector<SymbolTerm> terms, bool allow_degenerate)
    : order_(order), dim_(dim), value_dim_(value_dim), terms_(std::move(terms)) {
    finalize(allow_degenerate);
}

void OperatorSymbol::finalize(bool allow_degenerate) {
    if (dim_ < 1) throw ValidationError("symbol: dimension d must be >= 1");
    if (value_dim_ < 1) throw ValidationError("symbol: value dimension n must be >= 1");
    if (order_ < (allow_degenerate ? 0 : 1)) throw ValidationError("symbol: order m must be >= 1");
    std::map<MultiIndex, CMatrix> merged;
    for (auto& t : terms_) {
        if (t.alpha.size() != static_cast<std::size_t>(dim_)) throw ValidationError("symbol: multi-index has wrong dimension");
        for (int a : t.alpha)
            if (a < 0) throw ValidationError("symbol: negative multi-index entry");
        if (spectracontrol::order(t.alpha) > order_) throw ValidationError("symbol: term exceeds the declared order m");
        if (t.coefficient.rows() != value_dim_ || t.coefficient.cols() != value_dim_)
            throw ValidationError("symbol: coefficient must be an n x n matrix");
        if (!t.coefficient.allFinite()) throw ValidationError("symbol: non-finite coefficient");
        auto [it, fresh] = merged.try_emplace(t.alpha, t.coefficient);
        if (!fresh) it->second += t.coefficient;
    }
    terms_.clear();
    for (auto& [alpha, c] : merged)
        if (c.cwiseAbs().maxCoeff() != 0.0) terms_.push_back({alpha, c});
    std::stable_sort(terms_.begin(), terms_.end(), [](const SymbolTerm& a, const SymbolTerm& b) {
        return spectracontrol::order(a.alpha) < spectracontrol::order(b.alpha);
    });
    if (!allow_degenerate && degree() != order_)
        throw ValidationError("symbol: no nonzero coefficient of order m (symbol must have degree m)");

    std::ostringstream key;
    key << order_ << '/' << dim_ << '/' << value_dim_;
    for (const auto& t : terms_) {
        key << '|';
        for (int a : t.alpha) key << a << ',';
        for (Eigen::Index i = 0; i < t.coefficient.size(); ++i)
            key << hex(t.coefficient.data()[i].real()) << ':' << hex(t.coefficient.data()[i].imag()) << ';';
    }
    fingerprint_ = key.str();
}

int OperatorSymbol::degree() const {
    int deg = -1;
    for (const auto& t : terms_) deg = std::max(deg, spectracontrol::order(t.alpha));
    return deg;
}

CMatrix OperatorSymbol::evaluate(std::span<const Real> xi) const {
    if (xi.size() != static_cast<std::size_t>(dim_)) throw ValidationError("symbol: xi has wrong dimension");
    const auto n = static_cast<Eigen::Index>(value_dim_);
    CMatrix acc = CMatrix::Zero(n, n);
    // powers[i][k] = xi_i^k
    std::vector<std::vector<Real>> powers(static_cast<std::size_t>(dim_), std::vector<Real>(static_cast<std::size_t>(order_) + 1, 1.0));
    for (int i = 0; i < dim_; ++i)
        for (int k = 1; k <= order_; ++k)
            powers[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] =
                powers[static_cast<std::size_t>(i)][static_cast<std::size_t>(k - 1)] * xi[static_cast<std::size_t>(i)];
    for (const auto& t : terms_) {
        Real mono = 1.0;
        for (int i = 0; i < dim_; ++i)
            mono *= powers[static_cast<std::size_t>(i)][static_cast<std::size_t>(t.alpha[static_cast<std::size_t>(i)])];
        acc += mono * t.coefficient;
    }
    return acc;
}

OperatorSymbol OperatorSymbol::principal() const {
    std::vector<SymbolTerm> top;
    for (const auto& t : terms_)
        if (spectracontrol::order(t.alpha) == order_) top.push_back(t);
    return OperatorSymbol(order_, dim_, value_dim_, std::move(top), true);
}

OperatorSymbol OperatorSymbol::lower_order() const {
    std::vector<SymbolTerm> low;
    for (const auto& t : terms_)
        if (spectracontrol::order(t.alpha) < order_) low.push_back(t);
    return OperatorSymbol(std::max(order_ - 1, 0), dim_, value_dim_, std::move(low), true);
}

OperatorSymbol OperatorSymbol::derivative(const MultiIndex& beta) const {
    if (beta.size() != static_cast<std::size_t>(dim_)) throw ValidationError("symbol derivative: beta has wrong dimension");
    std::vector<SymbolTerm> out;
    for (const auto& t : terms_) {
        if (!leq(beta, t.alpha)) continue;
        Real factor = 1.0;
        MultiIndex shifted = t.alpha;
        for (std::size_t i = 0; i < beta.size(); ++i) {
            for (int k = 0; k < beta[i]; ++k) factor *= t.alpha[i] - k;
            shifted[i] -= beta[i];
        }
        out.push_back({shifted, factor * t.coefficient});
    }
    return OperatorSymbol(std::max(order_ - spectracontrol::order(beta), 0), dim_, value_dim_, std::move(out), true);
}

OperatorSymbol OperatorSymbol::scaled(Complex s) const {
    auto out = terms_;
    for (auto& t : out) t.coefficient *= s;
    return OperatorSymbol(order_, dim_, value_dim_, std::move(out), true);
}

OperatorSymbol OperatorSymbol::conjugated_by(const CMatrix& unitary) const {
    auto out = terms_;
    for (auto& t : out) t.coefficient = unitary * t.coefficient * unitary.adjoint();
    return OperatorSymbol(order_, dim_, value_dim_, std::move(out), true);
}

OperatorSymbol OperatorSymbol::heat(int dim, int value_dim) { return polyharmonic(dim, 1, value_dim); }

OperatorSymbol OperatorSymbol::polyharmonic(int dim, int k, int value_dim) {
    if (k < 1) throw ValidationError("polyharmonic: k must be >= 1");
    // (xi_1^2 + ... + xi_d^2)^k by repeated multiplication of coefficient maps.
    std::map<MultiIndex, Real> poly{{MultiIndex(static_cast<std::size_t>(dim), 0), 1.0}};
    for (int step = 0; step < k; ++step) {
        std::map<MultiIndex, Real> next;
        for (const auto& [alpha, c] : poly)
            for (int i = 0; i < dim; ++i) {
                auto beta = alpha;
                beta[static_cast<std::size_t>(i)] += 2;
                next[beta] += c;
            }
        poly = std::move(next);
    }
    std::vector<SymbolTerm> terms;
    const auto n = static_cast<Eigen::Index>(value_dim);
    for (const auto& [alpha, c] : poly) terms.push_back({alpha, c * CMatrix::Identity(n, n)});
    return OperatorSymbol(2 * k, dim, value_dim, std::move(terms));
}

// ---------------------------------------------------------------------------
// Sectors

Sector derived_sector(Real kappa) {
    if (!(kappa >= 1.0)) throw ValidationError("derived_sector: kappa must be >= 1");
    return {2.0 * kappa + 1.0, kPi - std::atan(2.0 * kappa), -1.0 / (2.0 * kappa)};
}

bool in_sector(Complex lambda, Real theta, Real omega) {
    if (lambda == Complex(0.0, 0.0)) return true;
    const Complex z = lambda - omega;
    if (z == Complex(0.0, 0.0)) return true;
    return std::abs(std::arg(z)) <= theta;
}

std::vector<std::vector<Real>> sphere_points(int dim, std::size_t count) {
    if (dim < 1) throw ValidationError("sphere_points: dim must be >= 1");
    if (dim == 1) return {{1.0}, {-1.0}};
    std::vector<std::vector<Real>> out;
    out.reserve(count);
    if (dim == 2) {
        for (std::size_t i = 0; i < count; ++i) {
            const Real t = 2.0 * kPi * static_cast<Real>(i) / static_cast<Real>(count);
            out.push_back({std::cos(t), std::sin(t)});
        }
        return out;
    }
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
    const int coords = dim + (dim % 2);
    if (coords > 16) throw ValidationError("sphere_points: dimension too large");
    auto halton = [](std::size_t i, int base) {
        Real f = 1.0, r = 0.0;
        while (i > 0) {
            f /= base;
            r += f * static_cast<Real>(i % static_cast<std::size_t>(base));
            i /= static_cast<std::size_t>(base);
        }
        return r;
    };
    for (std::size_t i = 1; out.size() < count; ++i) {
        std::vector<Real> g(static_cast<std::size_t>(coords));
        for (int c = 0; c < coords; c += 2) {
            const Real u1 = std::max(halton(i, primes[c]), 1e-300);
            const Real u2 = halton(i, primes[c + 1]);
            const Real r = std::sqrt(-2.0 * std::log(u1));
            g[static_cast<std::size_t>(c)] = r * std::cos(2.0 * kPi * u2);
            g[static_cast<std::size_t>(c) + 1] = r * std::sin(2.0 * kPi * u2);
        }
        g.resize(static_cast<std::size_t>(dim));
        const Real nrm = euclidean(g);
        if (!(nrm > 1e-12)) continue;
        for (auto& v : g) v /= nrm;
        out.push_back(std::move(g));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normal ellipticity

namespace {

struct DirectionScan {
    Real sup = 0.0;
    std::optional<EllipticityWitness> failure;
};

}  // namespace

EllipticityReport check_normal_ellipticity(const OperatorSymbol& symbol, const EllipticityOptions& options) {
    const int d = symbol.dim();
    const auto n = static_cast<Eigen::Index>(symbol.value_dim());
    const std::size_t wanted = options.sphere_samples ? options.sphere_samples : static_cast<std::size_t>(256 * d);
    if (wanted < static_cast<std::size_t>(256 * d) && d > 1)
        throw ValidationError("ellipticity: at least 256 d sphere samples are required");
    if (options.lambda_samples < 2) throw ValidationError("ellipticity: at least 2 lambda samples per ray are required");
    const auto dirs = sphere_points(d, wanted);
    const auto am = symbol.principal();

    EllipticityReport report;
    report.q = options.q;
    report.sphere_samples = dirs.size();

    std::vector<CMatrix> am_values(dirs.size());
    Real norm_max = 0.0;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        am_values[i] = am.evaluate(dirs[i]);
        norm_max = std::max(norm_max, operator_norm(am_values[i], options.q));
    }
    const Real R = 1e3 * std::max(norm_max, 1e-300);
    report.lambda_max = R;
    const auto radii = log_space(1e-3, R, options.lambda_samples);
    static const Real ray_angles[] = {kPi / 2, -kPi / 2, kPi / 4, -kPi / 4, 0.0};
    std::vector<Complex> lambdas{Complex(0.0, 0.0)};
    for (Real ang : ray_angles)
        for (Real r : radii) lambdas.push_back(std::polar(r, ang));
    report.lambda_samples = lambdas.size();

    std::vector<DirectionScan> scans(dirs.size());
    parallel_for(dirs.size(), [&](std::size_t i) {
        auto& scan = scans[i];
        const CMatrix& T = am_values[i];
        const Real scale = std::max(1.0, operator_norm(T, options.q));
        Eigen::ComplexEigenSolver<CMatrix> eig(T, false);
        for (Eigen::Index k = 0; k < n; ++k) {
            const Complex mu = eig.eigenvalues()[k];
            if (mu.real() <= 1e-12 * scale) {
                scan.failure = EllipticityWitness{dirs[i], -mu,
                                                  "eigenvalue of a_m(xi) with non-positive real part; -lambda is in the spectrum"};
                scan.sup = kInf;
                return;
            }
        }
        for (const Complex& lam : lambdas) {
            const CMatrix shifted = lam * CMatrix::Identity(n, n) + T;
            const Real v = (1.0 + std::abs(lam)) * inverse_norm(shifted, options.q);
            if (!std::isfinite(v)) {
                scan.failure = EllipticityWitness{dirs[i], lam, "lambda + a_m(xi) is singular"};
                scan.sup = kInf;
                return;
            }
            scan.sup = std::max(scan.sup, v);
        }
    });

    Real sup = 0.0;
    for (auto& s : scans) {
        if (s.failure && !report.witness) report.witness = s.failure;
        sup = std::max(sup, s.sup);
    }
    report.tail_bound = (1.0 + R) / (R - norm_max);
    if (norm_max == 0.0) {
        report.witness = EllipticityWitness{dirs.front(), Complex(0.0, 0.0), "principal symbol vanishes on the sphere"};
        sup = kInf;
    }
    if (report.witness || !std::isfinite(sup)) {
        report.pass = false;
        report.kappa = kInf;
        return report;
    }
    report.pass = true;
    report.kappa = std::max({sup, report.tail_bound, 1.0});
    report.sector = derived_sector(report.kappa);
    for (const auto& alpha : multi_indices_up_to(d, d + 1, true))
        report.seminorms.push_back({alpha, seminorm_N(symbol, alpha, options.q)});
    if (options.with_perturbation) {
        try {
            report.perturbation = perturbation_params(symbol, report);
        } catch (const NumericalFailure&) {
            report.perturbation.reset();
        }
    }
    return report;
}

PerturbationParams perturbation_params(const OperatorSymbol& symbol, const EllipticityReport& report) {
    if (!report.pass || !report.sector) throw ValidationError("perturbation_params: requires a passing ellipticity report");
    const int d = symbol.dim();
    const int m = symbol.order();
    const auto n = static_cast<Eigen::Index>(symbol.value_dim());
    const Sector sec = *report.sector;
    PerturbationParams out;
    out.gamma = std::abs(sec.mu);
    out.M_prime = 4.0 * report.kappa + 2.0;
    const auto b = symbol.lower_order();
    if (b.is_zero()) {
        out.omega = 1.0;
        out.worst_neumann = 0.0;
        return out;
    }
    const auto am = symbol.principal();
    const Real N0 = seminorm_N(b, MultiIndex(static_cast<std::size_t>(d), 0), report.q);

    struct Sample {
        CMatrix am;
        CMatrix b;
        Real shift;  // -gamma |xi|^m
        Real scale;
    };
    std::vector<Sample> samples;
    const auto dirs = sphere_points(d, d == 1 ? 2 : static_cast<std::size_t>(32 * d));
    std::vector<Real> radii{0.0};
    for (Real r : log_space(1e-3, 1e3, 61)) radii.push_back(r);
    for (const auto& dir : dirs)
        for (Real r : radii) {
            std::vector<Real> xi(dir);
            for (auto& v : xi) v *= r;
            const CMatrix A = am.evaluate(xi);
            samples.push_back({A, b.evaluate(xi), -out.gamma * std::pow(r, m), 1.0 + operator_norm(A, report.q)});
        }
    const Real angles[] = {-sec.phi, -sec.phi / 2, 0.0, sec.phi / 2, sec.phi};

    auto worst_for = [&](Real omega) {
        std::vector<Real> worst(samples.size(), 0.0);
        parallel_for(samples.size(), [&](std::size_t i) {
            const auto& s = samples[i];
            const Real vertex = s.shift + omega;
            const auto rhos = log_space(1e-4 * (s.scale + omega), 1e4 * (s.scale + omega), 60);
            Real w = 0.0;
            auto probe = [&](Complex lam) {
                const CMatrix shifted = lam * CMatrix::Identity(n, n) + s.am;
                Eigen::FullPivLU<CMatrix> lu(shifted);
                if (!lu.isInvertible() || lu.rcond() < 1e-15) {
                    w = kInf;
                    return;
                }
                w = std::max(w, operator_norm(s.b * lu.inverse(), report.q));
            };
            probe(Complex(vertex, 0.0));
            for (Real ang : angles)
                for (Real rho : rhos) probe(vertex + std::polar(rho, ang));
            worst[i] = w;
        });
        return *std::max_element(worst.begin(), worst.end());
    };

    const Real cap = 1e6 * std::max(N0, 1e-12);
    for (Real omega = 1.0;; omega *= 2.0, ++out.doublings) {
        if (omega > std::max(cap, 1.0)) throw NumericalFailure("perturbation_params: omega search exceeded its cap");
        const Real w = worst_for(omega);
        if (w <= 0.5) {
            out.omega = omega;
            out.worst_neumann = w;
            return out;
        }
    }
}

Real seminorm_N(const OperatorSymbol& symbol, const MultiIndex& alpha, XNorm q) {
    const int d = symbol.dim();
    const int n = symbol.order();
    if (alpha.size() != static_cast<std::size_t>(d)) throw ValidationError("seminorm_N: alpha has wrong dimension");
    if (order(alpha) > d + 1 + n) throw ValidationError("seminorm_N: |alpha| must be <= d + 1 + m");
    const auto dirs = sphere_points(d, d == 1 ? 2 : static_cast<std::size_t>(64 * d));
    std::vector<Real> radii{0.0};
    for (Real r : log_space(1e-3, 1e4, 200)) radii.push_back(r);

    Real best = 0.0;
    // Enumerate beta <= alpha.
    std::vector<MultiIndex> betas{MultiIndex(static_cast<std::size_t>(d), 0)};
    for (int i = 0; i < d; ++i) {
        std::vector<MultiIndex> next;
        for (const auto& b : betas)
            for (int k = 0; k <= alpha[static_cast<std::size_t>(i)]; ++k) {
                auto c = b;
                c[static_cast<std::size_t>(i)] = k;
                next.push_back(std::move(c));
            }
        betas = std::move(next);
    }
    for (const auto& beta : betas) {
        const auto db = symbol.derivative(beta);
        if (db.is_zero()) continue;
        const int e = n - order(beta);
        for (const auto& dir : dirs) {
            for (Real r : radii) {
                std::vector<Real> xi(dir);
                for (auto& v : xi) v *= r;
                best = std::max(best, operator_norm(db.evaluate(xi), q) / std::pow(1.0 + r, e));
            }
            // Limit r -> inf: only the degree-e homogeneous part survives.
            const auto n_rows = static_cast<Eigen::Index>(symbol.value_dim());
            CMatrix top = CMatrix::Zero(n_rows, n_rows);
            for (const auto& t : db.terms()) {
                if (order(t.alpha) != e) continue;
                Real mono = 1.0;
                for (int i = 0; i < d; ++i) mono *= std::pow(dir[static_cast<std::size_t>(i)], t.alpha[static_cast<std::size_t>(i)]);
                top += mono * t.coefficient;
            }
            best = std::max(best, operator_norm(top, q));
        }
    }
    return best;
}

}  // namespace spectracontrol
