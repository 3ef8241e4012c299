#include "spectracontrol/propagator.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace spectracontrol;

namespace {

GridSpec line(int N = 128, Real Q = 16.0, int n = 1) {
    GridSpec g;
    g.points = N;
    g.period = Q;
    g.value_dim = n;
    return g;
}

OperatorSymbol nonnormal() {
    CMatrix A(2, 2), B(2, 2);
    A << 1.0, 0.5, 0.0, 2.0;
    B << Complex(0.0, 0.3), 1.0, -0.2, 0.0;
    return OperatorSymbol(2, 1, 2, {{{2}, A}, {{1}, B}});
}

Real max_diff(const SpectralField& a, const SpectralField& b) {
    Real m = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

}  // namespace

TEST_CASE("S_0 is the identity and the semigroup law holds") {
    const auto sym = nonnormal();
    const auto g = line(64, 8.0, 2);
    const Propagator P0(sym, g, 0.0);
    for (std::size_t i = 0; i < g.cells(); ++i) CHECK(P0.at(i).isIdentity(0.0));
    CounterRng rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        const Real t = rng.uniform() * 0.5, s = rng.uniform() * 0.5;
        const auto f = white_noise(g, static_cast<std::uint64_t>(trial));
        const auto a = apply_propagator(sym, apply_propagator(sym, f, s), t);
        const auto b = apply_propagator(sym, f, t + s);
        CHECK(max_diff(a, b) <= 1e-9 * lp_norm(f, kInf));
    }
}

TEST_CASE("heat damps a single mode by exp(-t xi^2)") {
    const auto g = line();
    const std::vector<int> k{3};
    const std::vector<Complex> v{1.0};
    const auto f = SpectralField::single_mode(g, k, v);
    const Real xi = g.axis_frequency(3), t = 0.7;
    const auto out = apply_propagator(OperatorSymbol::heat(1), f, t);
    CHECK(max_diff(out, f.scaled(std::exp(-t * xi * xi))) <= 1e-14);
}

TEST_CASE("cutoff plateau, support and partition") {
    const auto g = line(256, 16.0);
    const std::vector<Complex> v{1.0};
    const CutoffSpec spec{4.0};
    const std::vector<int> low{5}, high{11};  // |xi| = 1.96 <= 2, |xi| = 4.32 >= 4
    const auto fl = SpectralField::single_mode(g, low, v);
    const auto fh = SpectralField::single_mode(g, high, v);
    CHECK(max_diff(apply_cutoff(fl, spec), fl) == 0.0);
    CHECK(apply_cutoff(fh, spec).is_zero());

    const auto f = white_noise(g, 4);
    const auto p = apply_cutoff(f, spec), q = apply_cutoff(f, spec, true);
    for (std::size_t i = 0; i < g.samples(); ++i)
        CHECK(std::abs(p.coefficients()[i] + q.coefficients()[i] - f.coefficients()[i]) <=
              1e-15 * std::abs(f.coefficients()[i]));

    const auto sym = OperatorSymbol::heat(1);
    const auto pv = apply_cutoff(apply_propagator(sym, f, 0.3), spec);
    const auto vp = apply_propagator(sym, apply_cutoff(f, spec), 0.3);
    CHECK(max_diff(pv, vp) <= 1e-15 * lp_norm(f, kInf));
}

TEST_CASE("adjoint propagator") {
    const auto g = line(64, 8.0, 2);
    const auto heat = OperatorSymbol::heat(1, 2);
    const auto f = white_noise(g, 1), h = white_noise(g, 2);
    CHECK(max_diff(adjoint_propagator(heat, f, 0.4), apply_propagator(heat, f, 0.4)) <= 1e-15);
    CHECK(max_diff(adjoint_propagator(nonnormal(), f, 0.0), f) <= 1e-15);

    const auto sym = nonnormal();
    for (Real t : {0.01, 0.1, 0.5}) {
        const Complex lhs = bilinear_pairing(adjoint_propagator(sym, f, t), h);
        const Complex rhs = bilinear_pairing(f, apply_propagator(sym, h, t));
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
        const Complex hl = hilbert_pairing(hilbert_adjoint_propagator(sym, f, t), h);
        const Complex hr = hilbert_pairing(f, apply_propagator(sym, h, t));
        CHECK(std::abs(hl - hr) <= 1e-10 * std::max(1.0, std::abs(hl)));
    }
}

TEST_CASE("decay probe") {
    const auto heat = OperatorSymbol::heat(1);
    const auto rep = check_normal_ellipticity(heat);
    const std::vector<Real> ts{0.0, 0.1, 0.5, 1.0};
    std::vector<std::vector<Real>> xis{{0.0}, {0.5}, {1.0}, {2.0}, {4.0}};
    const auto p0 = symbol_decay_probe(heat, rep, {0}, ts, xis);
    CHECK(p0.holds);
    CHECK(p0.K_alpha == doctest::Approx(1.0));
    CHECK(p0.mu <= 1.0);
    for (const auto& row : p0.rows)
        if (row.t == 0.0) CHECK(row.lhs == doctest::Approx(1.0));

    CMatrix A(2, 2), B(2, 2);
    A << 1.0, 1.0, 0.0, 1.0;
    B << 0.0, 1.0, 0.0, 0.0;
    const OperatorSymbol tri(2, 1, 2, {{{2}, A}, {{0}, B}});
    const auto rt = check_normal_ellipticity(tri);
    REQUIRE(rt.pass);
    const auto p1 = symbol_decay_probe(tri, rt, {1}, ts, xis);
    CHECK(p1.holds);
    CHECK(std::isfinite(p1.K_alpha));
}

TEST_CASE("heat dissipation matches the Parseval closed form") {
    const auto g = line(256, 16.0);
    const std::vector<Real> lams{4.0, 8.0};
    const std::vector<Real> ts{0.0, 0.1, 0.5};
    DissipationOptions o;
    o.ensemble = 16;
    const auto probe = dissipation_probe(OperatorSymbol::heat(1), g, lams, ts, o);
    for (const auto& row : probe.rows) {
        REQUIRE(row.exact);
        CHECK(*row.exact <= std::exp(-row.t * row.lambda * row.lambda / 4) * (1 + 1e-8));
        CHECK(row.estimate <= *row.exact * (1 + 1e-12));
        CHECK(row.estimate >= 0.95 * *row.exact);
        if (row.t == 0.0) CHECK(row.estimate <= 1.0 + 1e-12);
    }
    CHECK(probe.fit_found);
    CHECK(probe.c1 <= 1 + 1e-8);
    CHECK(probe.c2 >= 0.24);
}

TEST_CASE("generator convergence") {
    const auto g = line(128, 16.0);
    const std::vector<int> k{4};
    const std::vector<Complex> v{1.0};
    const auto f = SpectralField::single_mode(g, k, v).with_band({4.0});
    const Real xi = g.axis_frequency(4);
    const std::vector<Real> ts{1e-3, 5e-4, 2.5e-4};
    const auto chk = generator_check(OperatorSymbol::heat(1), f, ts);
    REQUIRE_FALSE(chk.skipped);
    for (const auto& row : chk.rows) CHECK(row.r == doctest::Approx(xi * xi * row.t / 2).epsilon(0.01));
    CHECK(chk.rows[1].r / chk.rows[0].r == doctest::Approx(0.5).epsilon(0.1));
    CHECK(chk.order >= 0.9);

    const auto c = SpectralField::constant(g, v).with_band({4.0});
    CHECK(generator_check(OperatorSymbol::heat(1), c, ts).skipped);
}

TEST_CASE("multiplier seminorm") {
    const auto g = line(128, 32.0);
    const auto zero = multiplier_seminorm(g, [](std::span<const Real>) { return CMatrix::Zero(1, 1).eval(); });
    CHECK(zero.mu == 0.0);
    CHECK(zero.kernel_l1 == 0.0);
    std::vector<Real> ratios;
    for (Real s : {1.0, 2.0, 4.0}) {
        const auto m = multiplier_seminorm(g, [s](std::span<const Real> xi) {
            return CMatrix::Constant(1, 1, std::exp(-s * xi[0] * xi[0])).eval();
        });
        CHECK(std::isfinite(m.mu));
        CHECK(m.kernel_l1 > 0.0);
        ratios.push_back(m.ratio);
    }
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    CHECK(*hi / *lo < 10.0);
}

TEST_CASE("ensemble norm estimate approaches the Parseval norm") {
    const auto g = line(128, 16.0, 2);
    const Propagator P(nonnormal(), g, 0.05);
    const auto est = estimate_operator_norm(P.multiplier(), 2.0, 8, 64, 3);
    const Real exact = parseval_norm(P.multiplier());
    CHECK(est.estimate <= exact * (1 + 1e-12));
    CHECK(est.estimate >= 0.95 * exact);
}
