#include "spectracontrol/matrix_exp.hpp"

#include <doctest.h>

#include <cmath>

using namespace spectracontrol;

TEST_CASE("exp of zero and nilpotent matrices") {
    CHECK(matrix_exp(CMatrix::Zero(3, 3)).isIdentity(0.0));
    CMatrix N = CMatrix::Zero(2, 2);
    N(0, 1) = 1.0;
    CMatrix expect(2, 2);
    expect << 1.0, 1.0, 0.0, 1.0;
    CHECK((matrix_exp(N) - expect).norm() <= 1e-15);
}

TEST_CASE("diagonal exponential") {
    CMatrix D = CMatrix::Zero(2, 2);
    D(0, 0) = Complex(-3.0, 1.0);
    D(1, 1) = Complex(0.5, -2.0);
    const auto E = matrix_exp(D);
    CHECK(std::abs(E(0, 0) - std::exp(D(0, 0))) <= 1e-14 * std::abs(std::exp(D(0, 0))));
    CHECK(std::abs(E(1, 1) - std::exp(D(1, 1))) <= 1e-14 * std::abs(std::exp(D(1, 1))));
    CHECK(std::abs(E(0, 1)) == 0.0);
}

TEST_CASE("overflowing arguments are rejected, exp_scaled rescales") {
    CMatrix big = CMatrix::Identity(2, 2) * (2.0 * matrix_exp_limit());
    CHECK_THROWS_AS(matrix_exp(big), NumericalFailure);
    CMatrix a = CMatrix::Identity(2, 2) * 1e6;
    const auto e = exp_scaled(-a, 1e3);  // exp(-1e9) is far below the smallest double
    CHECK(e.norm() == 0.0);
    CHECK_NOTHROW(exp_scaled(a, 0.0));
    CHECK_THROWS_AS(matrix_exp(a * 1e3), NumericalFailure);
}

TEST_CASE("integrated exponential") {
    const Real dt = 0.3;
    CMatrix a = CMatrix::Constant(1, 1, 2.0);
    CHECK(integrated_exp(a, dt)(0, 0).real() == doctest::Approx((1 - std::exp(-2.0 * dt)) / 2.0).epsilon(1e-14));
    CMatrix tiny = CMatrix::Constant(1, 1, 1e-9);
    CHECK(integrated_exp(tiny, dt)(0, 0).real() == doctest::Approx(dt).epsilon(1e-8));

    CMatrix A(2, 2);
    A << 1.0, 2.0, 0.0, 3.0;
    // compare with composite Simpson on exp(-sA)
    const int n = 2000;
    CMatrix sum = CMatrix::Zero(2, 2);
    for (int k = 0; k <= n; ++k) {
        const Real w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        sum += w * matrix_exp(-(dt * k / n) * A);
    }
    sum *= dt / (3.0 * n);
    CHECK((integrated_exp(A, dt) - sum).norm() <= 1e-12);
}
