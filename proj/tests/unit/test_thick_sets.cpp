#include "spectracontrol/thick_sets.hpp"

#include <doctest.h>

using namespace spectracontrol;

namespace {

GridSpec line(int N = 256, Real Q = 16.0) {
    GridSpec g;
    g.points = N;
    g.period = Q;
    return g;
}

}  // namespace

TEST_CASE("full grid is 1-thick for any aligned L") {
    const auto g = line();
    const ThickSet full(g, std::vector<std::uint8_t>(g.cells(), 1));
    for (Real L : {0.0625, 1.0, 2.5, 16.0}) {
        const std::vector<Real> Lv{L};
        CHECK(verify_thickness(full, Lv) == 1.0);
    }
}

TEST_CASE("period-2 stripes") {
    const auto g = line();
    const auto s = make_stripes(g, 1.0, 2.0, 0);
    REQUIRE(s.certificate());
    CHECK(s.certificate()->rho == doctest::Approx(0.5));
    const std::vector<Real> two{2.0}, one{1.0}, four{4.0};
    CHECK(verify_thickness(s, two) == doctest::Approx(0.5));
    CHECK(verify_thickness(s, one) == 0.0);
    CHECK(verify_thickness(s, four) >= verify_thickness(s, two));
    CHECK(verify_thickness(s, two) <= s.density() + 1e-15);
}

TEST_CASE("stripe construction edge cases") {
    const auto g = line();
    const auto full = make_stripes(g, 2.0, 2.0, 0);
    CHECK(full.certificate()->rho == 1.0);
    CHECK(full.count() == g.cells());
    CHECK_THROWS_AS(make_stripes(g, 0.0, 2.0, 0), ValidationError);
    CHECK_THROWS_AS(make_stripes(g, 0.03, 2.0, 0), ValidationError);  // not cell aligned
    const std::vector<Real> bad{0.1};
    CHECK_THROWS_AS(verify_thickness(full, bad), ValidationError);
}

TEST_CASE("random thick sets") {
    GridSpec g;
    g.dim = 2;
    g.points = 64;
    g.period = 8.0;
    const std::vector<Real> L{1.0, 1.0};
    const auto a = make_random_thick(g, 0.3, L, 7);
    const auto b = make_random_thick(g, 0.3, L, 7);
    CHECK(std::equal(a.indicator().begin(), a.indicator().end(), b.indicator().begin()));
    REQUIRE(a.certificate());
    CHECK(a.certificate()->rho > 0.0);
    CHECK(a.density() >= 0.3);
    CHECK(a.certificate()->rho == doctest::Approx(verify_thickness(a, L)));
    const auto full = make_random_thick(g, 1.0, L, 1);
    CHECK(full.count() == g.cells());
}

TEST_CASE("thickness is monotone in the set") {
    const auto g = line(128, 8.0);
    const auto small = make_stripes(g, 0.5, 2.0, 0);
    const auto big = make_stripes(g, 1.0, 2.0, 0);
    const std::vector<Real> L{2.0};
    CHECK(verify_thickness(small, L) <= verify_thickness(big, L));
}

TEST_CASE("certificates above the verified value are rejected") {
    const auto g = line();
    const auto s = make_stripes(g, 1.0, 2.0, 0);
    ThicknessCertificate bogus{0.9, {2.0}};
    CHECK_THROWS_AS(ThickSet(g, std::vector<std::uint8_t>(s.indicator().begin(), s.indicator().end()), bogus),
                    ValidationError);
}
