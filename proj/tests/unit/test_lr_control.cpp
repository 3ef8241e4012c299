#include "spectracontrol/lr_control.hpp"

#include <doctest.h>

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

ThickSet full(const GridSpec& g) {
    return ThickSet(g, std::vector<std::uint8_t>(g.cells(), 1)).certified(std::vector<Real>{g.cell_width()});
}

ControlSignal random_signal(const GridSpec& g, const ThickSet& E, Real T, int steps, std::uint64_t seed) {
    auto u = ControlSignal::zero(g, T, steps);
    for (int k = 0; k < steps; ++k)
        u.values[static_cast<std::size_t>(k)] = white_noise(g, seed + static_cast<std::uint64_t>(k)).masked(E.indicator());
    return u;
}

Real max_diff(const SpectralField& a, const SpectralField& b) {
    Real m = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

}  // namespace

TEST_CASE("zero control reproduces the propagator exactly") {
    const auto g = line();
    const auto E = make_stripes(g, 1.0, 2.0, 0);
    const auto y0 = white_noise(g, 1);
    const auto tr = simulate_mild(OperatorSymbol::heat(1), y0, E, ControlSignal::zero(g, 1.0, 16));
    const auto direct = apply_propagator(OperatorSymbol::heat(1), y0, 1.0);
    CHECK(max_diff(tr.states.back(), direct) == 0.0);

    const std::vector<int> k{2};
    const std::vector<Complex> v{1.0};
    const auto m = SpectralField::single_mode(g, k, v);
    const Real xi = g.axis_frequency(2);
    const auto tm = simulate_mild(OperatorSymbol::heat(1), m, E, ControlSignal::zero(g, 0.5, 4));
    CHECK(lp_norm(tm.states.back()) == doctest::Approx(std::exp(-0.5 * xi * xi) * lp_norm(m)).epsilon(1e-13));
}

TEST_CASE("piecewise-constant integration is refinement invariant") {
    const auto g = line(64, 8.0, 2);
    CMatrix A(2, 2);
    A << 1.0, 0.3, 0.0, 2.0;
    const OperatorSymbol sym(2, 1, 2, {{{2}, A}, {{0}, CMatrix::Identity(2, 2)}});
    const auto E = make_stripes(g, 1.0, 2.0, 0);
    const auto u = random_signal(g, E, 0.4, 5, 10);
    const auto y0 = white_noise(g, 2);
    const auto a = simulate_mild(sym, y0, E, u).states.back();
    const auto b = simulate_mild(sym, y0, E, u.refined(4)).states.back();
    CHECK(max_diff(a, b) <= 1e-8 * lp_norm(a, kInf));
}

TEST_CASE("mild solution is linear in (y0, u)") {
    const auto g = line(64, 8.0);
    const auto sym = OperatorSymbol::heat(1);
    const auto E = make_stripes(g, 1.0, 2.0, 0);
    const auto y0 = white_noise(g, 3), y1 = white_noise(g, 4);
    const auto u0 = random_signal(g, E, 0.5, 4, 20), u1 = random_signal(g, E, 0.5, 4, 30);
    const Complex a(0.5, 1.0), b(-2.0, 0.25);
    auto mix = u0;
    for (std::size_t k = 0; k < mix.values.size(); ++k) mix.values[k] = u0.values[k].scaled(a).plus(u1.values[k], b);
    const auto lhs = simulate_mild(sym, y0.scaled(a).plus(y1, b), E, mix).states.back();
    const auto rhs = simulate_mild(sym, y0, E, u0).states.back().scaled(a).plus(simulate_mild(sym, y1, E, u1).states.back(), b);
    CHECK(max_diff(lhs, rhs) <= 1e-10 * lp_norm(lhs, kInf));
}

TEST_CASE("control cost of a constant signal") {
    const auto g = line(64, 8.0);
    auto u = ControlSignal::zero(g, 2.0, 4);
    const std::vector<Complex> v{3.0};
    for (auto& f : u.values) f = SpectralField::constant(g, v);
    const Real nf = lp_norm(u.values[0], 2.0);
    CHECK(control_cost(u, 2.0, 2.0) == doctest::Approx(nf * std::sqrt(2.0)));
    CHECK(control_cost(u, 2.0, 1.0) == doctest::Approx(nf * 2.0));
    CHECK(control_cost(u, 2.0, kInf) == doctest::Approx(nf));
}

TEST_CASE("schedule") {
    const auto g = line(256, 16.0);  // Nyquist 16 pi
    ScheduleLimits lim{g.nyquist(), g.cells(), 0.75};
    const auto two = lr_schedule(1.0, g.nyquist() / 4, g, lim);
    REQUIRE(two.size() == 2);
    CHECK(two[1].lambda == doctest::Approx(2 * two[0].lambda));
    Real total = 0.0;
    for (const auto& s : two) total += s.active + s.passive;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(two.back().start + two.back().active + two.back().passive == 1.0);

    std::vector<std::size_t> counts;
    for (int N : {64, 128, 256, 512}) {
        const auto gn = line(N, 16.0);
        counts.push_back(lr_schedule(1.0, 1.0, gn, {gn.nyquist(), gn.cells(), 0.75}).size());
    }
    for (std::size_t i = 1; i < counts.size(); ++i) CHECK(counts[i] == counts[i - 1] + 1);
    CHECK_THROWS_AS(lr_schedule(1.0, g.nyquist(), g, lim), ValidationError);
}

TEST_CASE("stage control: zero state needs no control") {
    const auto g = line();
    const auto E = make_stripes(g, 1.0, 2.0, 0);
    const auto st = stage_control(OperatorSymbol::heat(1), SpectralField::zeros(g), 4.0, 0.25, E, 8);
    for (const auto& u : st.controls) CHECK(u.is_zero());
}

TEST_CASE("stage control matches the scalar Gramian on a full set") {
    const auto g = line(128, 16.0);
    const auto E = full(g);
    const std::vector<int> k{3};
    const std::vector<Complex> v{1.0};
    const auto y = SpectralField::single_mode(g, k, v);
    const Real xi = g.axis_frequency(3), tau = 0.3;
    const int steps = 6;
    const Real dt = tau / steps;
    const auto st = stage_control(OperatorSymbol::heat(1), y, 4.0, tau, E, steps);
    // minimal energy Q b^2 / S, b = exp(-tau xi^2), S = sum_k phi_k^2 / dt
    Real S = 0.0;
    const Real a = xi * xi;
    for (int j = 0; j < steps; ++j) {
        const Real lo = tau - (j + 1) * dt, hi = tau - j * dt;  // tau - s over the segment
        const Real phi = (std::exp(-a * lo) - std::exp(-a * hi)) / a;
        S += phi * phi / dt;
    }
    const Real b = std::exp(-tau * a);
    CHECK(st.gramian_energy == doctest::Approx(16.0 * b * b / S).epsilon(1e-8));
    CHECK(st.residual <= 1e-8);
}

TEST_CASE("stripes stage meets its postcondition with support on E") {
    const auto g = line(256, 16.0);
    const auto E = make_stripes(g, 1.0, 2.0, 0);
    const auto y = white_noise(g, 5);
    const auto st = stage_control(OperatorSymbol::heat(1), y, 4.0, 0.25, E, 16);
    CHECK(st.residual <= 1e-8);
    CHECK(st.cg_iterations > 0);
    for (const auto& u : st.controls)
        for (std::size_t c = 0; c < g.cells(); ++c)
            if (!E.indicator()[c]) CHECK(u.values()[c] == Complex(0.0));
}

TEST_CASE("synthesis from zero and from a random state") {
    const auto g = line(256, 16.0);
    const auto E = make_stripes(g, 1.0, 2.0, 0);
    ControlProblem zero{OperatorSymbol::heat(1), SpectralField::zeros(g), E};
    const auto oz = synthesize_control(zero);
    CHECK(oz.terminal_norm == 0.0);
    for (const auto& u : oz.u.values) CHECK(u.is_zero());

    ControlProblem pr{OperatorSymbol::heat(1), white_noise(g, 7), E};
    const auto out = synthesize_control(pr);
    CHECK(out.success);
    CHECK(out.relative <= 1e-6);
    CHECK(out.refined_relative <= 2e-6);
    CHECK(std::isfinite(out.cost));
    for (const auto& s : out.stages) CHECK(s.residual <= 1e-8);

    ControlProblem empty{OperatorSymbol::heat(1), white_noise(g, 7), ThickSet(g, std::vector<std::uint8_t>(g.cells(), 0))};
    CHECK_THROWS_AS(synthesize_control(empty), StageFailure);
}

TEST_CASE("observability on the full set is a contraction at r = inf") {
    const auto g = line(128, 16.0);
    const auto e = observability_probe(OperatorSymbol::heat(1), full(g), 0.5, 2.0, kInf);
    CHECK(e.bounded);
    CHECK(e.C_obs_hat <= 1.0 + 1e-12);
}

TEST_CASE("duality exponents and the self-adjoint case") {
    const auto g = line(128, 16.0);
    const auto E = make_stripes(g, 1.0, 2.0, 0);
    ObservabilityOptions o;
    const auto d = duality_check(OperatorSymbol::heat(1), E, 0.5, 1.0, o);
    CHECK(d.q == 2.0);
    CHECK(std::isinf(d.s));
    const auto d2 = duality_check(OperatorSymbol::heat(1), E, 0.5, 2.0, o);
    CHECK(std::abs(d2.forward.C_obs_hat - d2.adjoint.C_obs_hat) <= 1e-9 * d2.forward.C_obs_hat);
    CHECK(d2.ensemble_bound_holds);
}
