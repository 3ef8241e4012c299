#include "spectracontrol/elliptic_symbols.hpp"

#include <doctest.h>

#include <cmath>

using namespace spectracontrol;

namespace {

OperatorSymbol heat_plus(Real c) {
    return OperatorSymbol(2, 1, 1, {{{2}, CMatrix::Constant(1, 1, 1.0)}, {{0}, CMatrix::Constant(1, 1, c)}});
}

OperatorSymbol coupled() {
    CMatrix B = CMatrix::Zero(2, 2);
    B(0, 1) = 1.0;
    return OperatorSymbol(2, 1, 2, {{{2}, CMatrix::Identity(2, 2)}, {{0}, B}});
}

}  // namespace

TEST_CASE("evaluation") {
    const auto h = OperatorSymbol::heat(2);
    const std::vector<Real> xi{3.0, 4.0};
    CHECK(h.evaluate(xi)(0, 0) == Complex(25.0));
    const std::vector<Real> zero{0.0};
    CHECK(heat_plus(2.5).evaluate(zero)(0, 0) == Complex(2.5));

    // random 2x2 symbol of order 3 in d = 2 against a direct monomial sum
    CounterRng rng(4);
    std::vector<SymbolTerm> terms;
    for (const auto& a : multi_indices_up_to(2, 3, true)) {
        CMatrix c(2, 2);
        for (int i = 0; i < 4; ++i) c(i / 2, i % 2) = rng.complex_normal();
        terms.push_back({a, c});
    }
    const OperatorSymbol s(3, 2, 2, terms);
    const std::vector<Real> x{0.7, -1.3};
    CMatrix direct = CMatrix::Zero(2, 2);
    for (const auto& t : terms) direct += t.coefficient * (std::pow(x[0], t.alpha[0]) * std::pow(x[1], t.alpha[1]));
    CHECK((s.evaluate(x) - direct).norm() <= 1e-13 * direct.norm());
}

TEST_CASE("principal symbol") {
    const auto p = heat_plus(1.0).principal();
    CHECK(p.terms().size() == 1);
    CHECK(p.terms()[0].alpha == MultiIndex{2});
    CHECK(OperatorSymbol::heat(1).principal().fingerprint() == OperatorSymbol::heat(1).fingerprint());
    const auto pc = coupled().principal();
    const std::vector<Real> xi{0.37}, xi2{0.74};
    CHECK((pc.evaluate(xi2) - 4.0 * pc.evaluate(xi)).norm() <= 1e-12);
}

TEST_CASE("degree must match the order") {
    CHECK_THROWS_AS(OperatorSymbol(2, 1, 1, {{{1}, CMatrix::Constant(1, 1, 1.0)}}), ValidationError);
}

TEST_CASE("heat is normally elliptic with kappa sqrt 2") {
    const auto r = check_normal_ellipticity(OperatorSymbol::heat(1));
    REQUIRE(r.pass);
    CHECK(r.kappa >= 1.404);
    CHECK(r.kappa <= 1.43);
    REQUIRE(r.sector);
    REQUIRE(r.perturbation);
    CHECK(r.perturbation->omega == 1.0);
    CHECK(r.perturbation->M_prime == doctest::Approx(4 * r.kappa + 2));

    const auto r2 = check_normal_ellipticity(OperatorSymbol::heat(1, 2));
    CHECK(r2.kappa == doctest::Approx(r.kappa).epsilon(1e-12));
}

TEST_CASE("transport fails with a witness") {
    const OperatorSymbol t(1, 1, 1, {{{1}, CMatrix::Constant(1, 1, Complex(0.0, 1.0))}});
    const auto r = check_normal_ellipticity(t);
    CHECK_FALSE(r.pass);
    REQUIRE(r.witness);
    CHECK_FALSE(r.witness->reason.empty());
}

TEST_CASE("derived sector formulas") {
    const auto s1 = derived_sector(1.0);
    CHECK(s1.M == 3.0);
    CHECK(s1.phi == kPi - std::atan(2.0));
    CHECK(s1.mu == -0.5);
    const Real k = std::sqrt(2.0);
    const auto s2 = derived_sector(k);
    CHECK(s2.M == 2 * k + 1);
    CHECK(s2.phi == kPi - std::atan(2 * k));
    CHECK(s2.mu == -1 / (2 * k));
    CHECK(s2.phi > kPi / 2);
}

TEST_CASE("sector membership includes the origin and the vertex") {
    CHECK(in_sector(0.0, 0.1, 5.0));
    CHECK(in_sector(5.0, 0.1, 5.0));
    CHECK(in_sector(Complex(6.0, 0.05), 0.1, 5.0));
    CHECK_FALSE(in_sector(Complex(6.0, 1.0), 0.1, 5.0));
}

TEST_CASE("sector resolvent bound on samples") {
    const auto r = check_normal_ellipticity(OperatorSymbol::heat(1));
    const auto s = *r.sector;
    const std::vector<Real> xi{1.0};
    for (int i = 0; i <= 40; ++i) {
        const Real theta = -s.phi + 2 * s.phi * i / 40;
        for (Real rad : {0.01, 0.1, 0.5, 1.0, 3.0, 30.0, 300.0}) {
            const Complex lambda = s.mu + std::polar(rad, theta);
            const Real lhs = 1.0 / std::abs(lambda + 1.0);
            CHECK(lhs <= s.M / (1.0 + std::abs(lambda - s.mu)) * (1 + 1e-12));
        }
    }
}

TEST_CASE("omega tracks the lower-order size") {
    const Real w1 = check_normal_ellipticity(heat_plus(-1.0)).perturbation->omega;
    const Real w10 = check_normal_ellipticity(heat_plus(-10.0)).perturbation->omega;
    const Real w100 = check_normal_ellipticity(heat_plus(-100.0)).perturbation->omega;
    CHECK(w10 / w1 >= 10.0 / 2);
    CHECK(w10 / w1 <= 10.0 * 2);
    CHECK(w100 / w1 >= 100.0 / 2);
    CHECK(w100 / w1 <= 100.0 * 2);
}

TEST_CASE("unitary conjugation leaves kappa unchanged") {
    const Real c = std::cos(0.4), s = std::sin(0.4);
    CMatrix U(2, 2);
    U << c, Complex(0.0, s), Complex(0.0, s), c;
    const auto a = check_normal_ellipticity(coupled());
    const auto b = check_normal_ellipticity(coupled().conjugated_by(U));
    CHECK(a.pass == b.pass);
    CHECK(std::abs(a.kappa - b.kappa) <= 1e-10 * a.kappa);
}

TEST_CASE("seminorms") {
    const auto h = OperatorSymbol::heat(1);
    CHECK(seminorm_N(h, {0}) == doctest::Approx(1.0).epsilon(1e-9));
    const auto d2 = h.derivative({2});
    CHECK(seminorm_N(d2, {0}) == doctest::Approx(2.0));
    const auto s = heat_plus(3.0);
    CHECK(seminorm_N(s, {0}) <= seminorm_N(s, {1}));
    CHECK(seminorm_N(s, {1}) <= seminorm_N(s, {2}));
}
