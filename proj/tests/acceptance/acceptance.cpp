// Acceptance runner: one PASS/FAIL line per criterion, then a determinism check that reruns
// the whole suite and compares the JSON summaries byte for byte.
//
//   acceptance [--summary path] [--only N]

#include "spectracontrol/io.hpp"
#include "spectracontrol/lr_control.hpp"
#include "spectracontrol/ls_inequality.hpp"
#include "spectracontrol/propagator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

using namespace spectracontrol;

namespace {

struct Outcome {
    bool pass = true;
    Json summary = Json::object();
    std::string note;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) note = what;
        pass = pass && ok;
    }
};

GridSpec make_grid(int dim, int N, Real Q, int n = 1, Real p = 2.0) {
    GridSpec g;
    g.dim = dim;
    g.points = N;
    g.period = Q;
    g.value_dim = n;
    g.lp_exponent = p;
    return g;
}

// Parseval: ||f||_2^2 = Q^{-d} sum_k |w(xi_k)|^2 |c_k|^2, independent of the library's norms.
Real parseval(const SpectralField& f, const std::function<Real(const std::vector<Real>&)>& weight) {
    const auto& g = f.grid();
    Real sum = 0.0;
    for (std::size_t k = 0; k < g.cells(); ++k) {
        const Real w = weight(g.frequency(k));
        for (const auto& c : f.coefficient_at(k)) sum += w * w * std::norm(c);
    }
    return std::sqrt(sum / std::pow(g.period, g.dim));
}

OperatorSymbol coupled() {
    CMatrix B = CMatrix::Zero(2, 2);
    B(0, 1) = 1.0;
    return OperatorSymbol(2, 1, 2, {{{2}, CMatrix::Identity(2, 2)}, {{0}, B}});
}

Outcome sharp_bernstein() {
    Outcome o;
    Real worst = kInf, agreement = 0.0;
    std::uint64_t seed = 1000;
    int fields = 0;
    for (int d : {1, 2})
        for (int n : {1, 3}) {
            const auto g = d == 1 ? make_grid(1, 128, 16.0, n) : make_grid(2, 32, 8.0, n);
            const std::vector<Real> lambda = d == 1 ? std::vector<Real>{4.0} : std::vector<Real>{4.0, 3.0};
            for (int s = 0; s < 50; ++s, ++fields) {
                const auto f = random_band_limited(g, lambda, seed++);
                const Real nf = parseval(f, [](const auto&) { return 1.0; });
                for (int j = 0; j < d; ++j) {
                    MultiIndex a(static_cast<std::size_t>(d), 0);
                    a[static_cast<std::size_t>(j)] = 1;
                    const Real lhs = lp_norm(spectral_derivative(f, a), 2.0);
                    const Real oracle = parseval(f, [j](const auto& xi) { return xi[static_cast<std::size_t>(j)]; });
                    agreement = std::max(agreement, std::abs(lhs - oracle) / oracle);
                    const Real rhs = lambda[static_cast<std::size_t>(j)] / 2.0 * nf;
                    worst = std::min(worst, (rhs - lhs) / rhs);
                }
            }
        }
    o.require(worst >= -1e-10, "slack below -1e-10");
    o.require(agreement <= 1e-10, "derivative norm disagrees with the Parseval oracle");

    const auto g = make_grid(1, 128, 16.0);
    const int k = 5;
    const Real xi = 2.0 * kPi * k / g.period;
    const Real lambda = 2.0 * xi / 0.995;
    const std::vector<int> kk{k};
    const std::vector<Complex> v{Complex(0.6, -0.8)};
    const auto mode = SpectralField::single_mode(g, kk, v);
    const MultiIndex a{1};
    const Real attained = lp_norm(spectral_derivative(mode, a), 2.0) / (lambda / 2.0 * lp_norm(mode, 2.0));
    o.require(in_box(g, static_cast<std::size_t>(k), std::vector<Real>{lambda}), "edge mode outside the band");
    o.require(attained >= 0.99, "near-edge mode below 0.99 of the bound");
    o.summary = Json{{"fields", fields}, {"min_relative_slack", json_real(worst)},
                     {"parseval_agreement", json_real(agreement)}, {"edge_attainment", json_real(attained)}};
    return o;
}

Outcome ls_modulus_constant() {
    Outcome o;
    Real worst = 0.0;
    int cases = 0;
    for (Real p : {1.0, 2.0, kInf}) {
        const auto line = make_grid(1, 128, 16.0, 1, p);
        const auto plane = make_grid(2, 32, 8.0, 1, p);
        const std::vector<Real> L1{1.0};
        const std::vector<std::pair<ThickSet, std::vector<Real>>> sets{
            {make_stripes(line, 1.0, 2.0, 0), {4.0}},
            {make_random_thick(line, 0.3, L1, 3), {4.0}},
            {make_stripes(plane, 1.0, 2.0, 1), {4.0, 4.0}},
        };
        for (const auto& [E, lambda] : sets) {
            const auto& g = E.grid();
            const Real expect = std::isinf(p) ? 1.0 : std::pow(E.density(), 1.0 / p);
            const std::vector<Complex> one{Complex(2.0, 1.0)};
            const std::vector<int> k(static_cast<std::size_t>(g.dim), 2);
            for (const auto& f : {SpectralField::constant(g, one), SpectralField::single_mode(g, k, one)}) {
                const Real got = ls_ratio(f.with_band(lambda), E).ratio;
                worst = std::max(worst, std::abs(got - expect));
                ++cases;
            }
        }
    }
    o.require(worst <= 1e-10, "ratio differs from density^(1/p)");
    o.summary = Json{{"cases", cases}, {"max_error", json_real(worst)}};
    return o;
}

Outcome ls_bound_shape() {
    Outcome o;
    const auto g = make_grid(1, 128, 16.0);
    const Real L = 2.0, K = kFrozenLsConstant;
    Json rows = Json::array();
    std::uint64_t seed = 5000;
    for (Real rho : {0.25, 0.5}) {
        const auto E = make_stripes(g, rho * L, L, 0);
        o.require(E.certificate() && std::abs(E.certificate()->rho - rho) < 1e-15, "stripe certificate");
        for (Real lambda : {2.0, 4.0, 8.0}) {
            const std::vector<Real> lam{lambda};
            const auto ens = ls_probe_ensemble(g, E, lam, 100, seed);
            seed += 100;
            const Real bound = std::pow(rho / K, K * (1.0 + L * lambda));
            o.require(ens.min_ratio >= bound, "ensemble ratio below the frozen-K bound");
            rows.push_back(Json{{"rho", rho}, {"lambda", lambda}, {"min_ratio", json_real(ens.min_ratio)},
                                {"bound", json_real(bound)}, {"fitted_K", json_real(ens.fitted_K)}});
        }
    }
    o.summary = Json{{"K", K}, {"rows", rows}};
    return o;
}

Outcome good_cube_mass() {
    Outcome o;
    const Real A = 2.0;
    Json rows = Json::array();
    for (Real p : {2.0, kInf}) {
        const auto g = make_grid(1, 128, 16.0, 1, p);
        const Real C3 = std::isinf(p) ? 1.0 : 1.0 - std::pow(0.5 * (1.0 / (1.0 - 1.0 / A) - 1.0), 1.0 / p);
        Real worst = kInf;
        std::size_t bad = 0;
        for (int s = 0; s < 100; ++s) {
            const auto f = random_band_limited(g, std::vector<Real>{4.0}, 7000 + static_cast<std::uint64_t>(s));
            const auto rpt = classify_cubes(f, A, 6);
            Real good = 0.0;
            for (const auto& c : rpt.cubes) {
                if (!c.good) {
                    ++bad;
                    continue;
                }
                good = std::isinf(p) ? std::max(good, c.local_norm) : good + std::pow(c.local_norm, p);
            }
            if (!std::isinf(p)) good = std::pow(good, 1.0 / p);
            const Real total = lp_norm(f, p);
            worst = std::min(worst, good / total);
            o.require(good >= C3 * total * (1.0 - 1e-12), "good-cube mass below C3 ||f||");
        }
        rows.push_back(Json{{"p", json_real(p)}, {"C3", json_real(C3)}, {"min_good_fraction", json_real(worst)},
                            {"bad_cubes", bad}});
    }
    o.summary = Json{{"A", A}, {"samples", 100}, {"rows", rows}};
    return o;
}

Outcome ellipticity_oracles() {
    Outcome o;
    const auto heat = check_normal_ellipticity(OperatorSymbol::heat(1));
    o.require(heat.pass && heat.kappa >= 1.404 && heat.kappa <= 1.43, "heat kappa outside [1.404, 1.43]");
    const OperatorSymbol transport(1, 1, 1, {{{1}, CMatrix::Constant(1, 1, Complex(0.0, 1.0))}});
    const auto tr = check_normal_ellipticity(transport);
    o.require(!tr.pass && tr.witness.has_value(), "transport symbol not rejected with a witness");
    const Real k = std::sqrt(2.0);
    const auto s = derived_sector(k);
    o.require(s.M == 2.0 * k + 1.0 && s.phi == kPi - std::atan(2.0 * k) && s.mu == -1.0 / (2.0 * k),
              "derived sector differs from the closed form");
    o.summary = Json{{"heat_kappa", json_real(heat.kappa)},
                     {"transport_witness", tr.witness ? tr.witness->reason : ""},
                     {"sector", Json{{"M", json_real(s.M)}, {"phi", json_real(s.phi)}, {"mu", json_real(s.mu)}}}};
    return o;
}

Outcome dissipation_oracles() {
    Outcome o;
    const auto g = make_grid(1, 256, 16.0);
    std::vector<Real> ts;
    for (int i = 0; i <= 8; ++i) ts.push_back(0.25 * i);
    const std::vector<Real> lambdas{4.0, 8.0, 16.0};
    const auto probe = dissipation_probe(OperatorSymbol::heat(1), g, lambdas, ts);
    Real worst = 0.0;
    for (const auto& row : probe.rows) {
        const Real bound = std::exp(-row.t * row.lambda * row.lambda / 4.0) * (1.0 + 1e-8);
        const Real seen = std::max(row.estimate, row.exact.value_or(0.0));
        worst = std::max(worst, seen / bound);
        o.require(seen <= bound, "dissipation above exp(-t lambda^2 / 4)");
    }
    const auto bg = make_grid(1, 512, 16.0);
    const std::vector<Real> u{1.0, 2.0, 4.0, 8.0};
    const auto fit = dissipation_exponent(OperatorSymbol::polyharmonic(1, 2), bg, lambdas, u);
    o.require(std::abs(fit.exponent - 4.0) <= 0.1, "biharmonic exponent outside 4 +- 0.1");
    o.summary = Json{{"rows", probe.rows.size()}, {"max_norm_over_bound", json_real(worst)},
                     {"biharmonic_exponent", json_real(fit.exponent)}};
    return o;
}

Outcome duality() {
    Outcome o;
    CounterRng rng(42);
    Real worst = 0.0;
    int nonnormal = 0;
    for (int pair = 0; pair < 50; ++pair) {
        const bool matrix = pair % 2 == 1;
        const auto g = make_grid(1, 64, 8.0, matrix ? 2 : 1);
        OperatorSymbol sym = OperatorSymbol::heat(1);
        if (matrix) {
            CMatrix A(2, 2), B(2, 2), C(2, 2);
            A << 1.0, rng.uniform(), 0.0, 1.0 + rng.uniform();
            for (int i = 0; i < 4; ++i) B(i / 2, i % 2) = 0.5 * rng.complex_normal();
            for (int i = 0; i < 4; ++i) C(i / 2, i % 2) = 0.5 * rng.complex_normal();
            sym = OperatorSymbol(2, 1, 2, {{{2}, A}, {{1}, B}, {{0}, C}});
            if (!(A * A.adjoint()).isApprox(A.adjoint() * A)) ++nonnormal;
        }
        const Real t = 0.05 + rng.uniform();
        const auto f = white_noise(g, 9000 + 2 * static_cast<std::uint64_t>(pair));
        const auto h = white_noise(g, 9001 + 2 * static_cast<std::uint64_t>(pair));
        const Complex lhs = bilinear_pairing(adjoint_propagator(sym, f, t), h);
        const Complex rhs = bilinear_pairing(f, apply_propagator(sym, h, t));
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }
    o.require(worst <= 1e-10, "pairing mismatch above 1e-10");
    o.require(nonnormal > 0, "no non-normal symbol in the sample");
    o.summary = Json{{"pairs", 50}, {"non_normal", nonnormal}, {"max_mismatch", json_real(worst)}};
    return o;
}

Outcome generator_convergence() {
    Outcome o;
    const std::vector<Real> ts{1e-2, 1e-3, 1e-4, 1e-5};
    Json rows = Json::array();
    for (const auto& [name, sym] : std::vector<std::pair<std::string, OperatorSymbol>>{
             {"heat", OperatorSymbol::heat(1)}, {"coupled", coupled()}}) {
        const auto g = make_grid(1, 128, 16.0, sym.value_dim());
        const auto f = random_band_limited(g, std::vector<Real>{4.0}, 11);
        const auto chk = generator_check(sym, f, ts);
        o.require(!chk.skipped, name + ": trivial field");
        o.require(chk.order >= 0.9, name + ": order below 0.9");
        for (const auto& row : chk.rows) o.require(row.r <= chk.C * row.t * (1.0 + 1e-12), name + ": r(t) > C t");
        rows.push_back(Json{{"symbol", name}, {"C", json_real(chk.C)}, {"order", json_real(chk.order)}});
    }
    o.summary = Json{{"rows", rows}};
    return o;
}

Outcome null_control() {
    Outcome o;
    Json rows = Json::array();
    for (const auto& [name, sym] : std::vector<std::pair<std::string, OperatorSymbol>>{
             {"heat", OperatorSymbol::heat(1)}, {"coupled", coupled()}}) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto g = make_grid(1, 256, 16.0, sym.value_dim());
        ControlProblem pr{sym, white_noise(g, 7), make_stripes(g, 1.0, 2.0, 0)};
        pr.T = 1.0;
        pr.r = 2.0;
        const auto out = synthesize_control(pr);
        const Real secs = std::chrono::duration<Real>(std::chrono::steady_clock::now() - t0).count();
        const Real rel = out.terminal_norm / out.initial_norm;
        o.require(rel <= 1e-6, name + ": relative terminal norm above 1e-6");
        o.require(std::isfinite(out.cost), name + ": infinite cost");
        o.require(secs < 120.0, name + ": over the 2 min budget");
        rows.push_back(Json{{"system", name}, {"relative", json_real(rel)}, {"cost", json_real(out.cost)},
                            {"stages", out.stages.size()}});
    }
    o.summary = Json{{"rows", rows}};
    return o;
}

Outcome observability_monotone() {
    Outcome o;
    const auto g = make_grid(1, 256, 16.0);
    const auto E = make_stripes(g, 1.0, 2.0, 0);
    ObservabilityOptions opt;
    opt.node_spacing = 1.0 / 512.0;
    opt.seed = 3;
    Json rows = Json::array();
    Real previous = kInf;
    for (Real T : {0.25, 0.5, 1.0}) {
        const auto est = observability_probe(OperatorSymbol::heat(1), E, T, 2.0, 2.0, opt);
        o.require(est.bounded && est.C_obs_hat <= previous, "C_obs_hat increased with T");
        previous = est.C_obs_hat;
        rows.push_back(Json{{"T", T}, {"C_obs_hat", json_real(est.C_obs_hat)}, {"intervals", est.intervals}});
    }
    o.summary = Json{{"rows", rows}};
    return o;
}

struct Criterion {
    int id;
    const char* name;
    Real budget;  // seconds
    std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all{
        {1, "sharp Bernstein inequality", 10, sharp_bernstein},
        {2, "spectral inequality ratio for constant modulus", 5, ls_modulus_constant},
        {3, "spectral inequality bound shape with frozen K", 120, ls_bound_shape},
        {4, "mass on good cubes", 60, good_cube_mass},
        {5, "ellipticity oracles", 10, ellipticity_oracles},
        {6, "semigroup dissipation oracles", 60, dissipation_oracles},
        {7, "duality pairing", 10, duality},
        {8, "generator convergence", 10, generator_convergence},
        {9, "null control end to end", 240, null_control},
        {10, "observability monotone in T", 120, observability_monotone},
    };
    return all;
}

Json run_suite(int only, bool print, bool& all_pass) {
    Json summary = Json::object();
    for (const auto& c : criteria()) {
        if (only && only != 11 && c.id != only) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.note = std::string("exception: ") + e.what();
        }
        const Real secs = std::chrono::duration<Real>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.budget) o.require(false, "over the runtime budget");
        all_pass = all_pass && o.pass;
        summary[std::to_string(c.id)] = Json{{"pass", o.pass}, {"summary", o.summary}};
        if (print)
            std::printf("%s criterion %2d  %-48s %8.2fs%s%s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                        o.note.empty() ? "" : "  ", o.note.c_str());
        std::fflush(stdout);
    }
    return summary;
}

}  // namespace

int main(int argc, char** argv) {
    std::string summary_path;
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--summary") == 0 && i + 1 < argc) summary_path = argv[++i];
        else if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
        else {
            std::fprintf(stderr, "usage: acceptance [--summary path] [--only N]\n");
            return 2;
        }
    }
    bool pass = true;
    const auto first = run_suite(only, only != 11, pass).dump(2);
    if (!summary_path.empty()) write_json(summary_path, Json::parse(first));

    if (!only || only == 11) {
        const auto t0 = std::chrono::steady_clock::now();
        clear_propagator_cache();
        bool ignored = true;
        const auto second = run_suite(only, false, ignored).dump(2);
        const bool same = first == second;
        const Real secs = std::chrono::duration<Real>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion 11  %-48s %8.2fs%s\n", same ? "PASS" : "FAIL", "byte-identical summaries on rerun",
                    secs, same ? "" : "  summaries differ");
        pass = pass && same;
    }
    return pass ? 0 : 1;
}
