#include "spectracontrol/matrix_exp.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

namespace spectracontrol {

Real matrix_exp_limit() { return 1e4 * std::log(std::numeric_limits<Real>::max()); }

namespace {

Real norm1(const CMatrix& m) { return m.cwiseAbs().colwise().sum().maxCoeff(); }

}  // namespace

CMatrix matrix_exp(const CMatrix& m) {
    if (m.rows() != m.cols()) throw ValidationError("matrix_exp: matrix must be square");
    if (m.size() == 0) return m;
    if (!m.allFinite()) throw NumericalFailure("matrix_exp: non-finite entries");
    if (norm1(m) > matrix_exp_limit()) throw NumericalFailure("matrix_exp: norm too large, rescale t");
    if (m.rows() == 1) return CMatrix::Constant(1, 1, std::exp(m(0, 0)));
    return m.exp();
}

CMatrix exp_scaled(const CMatrix& m, Real s) {
    if (!(s >= 0.0)) throw ValidationError("exp_scaled: s must be >= 0");
    const auto n = m.rows();
    if (s == 0.0) return CMatrix::Identity(n, n);
    if (n == 1) return CMatrix::Constant(1, 1, std::exp(s * m(0, 0)));
    const Real size = s * norm1(m);
    int k = 0;
    while (size / std::ldexp(1.0, k) > 0.5 * matrix_exp_limit()) ++k;
    CMatrix e = matrix_exp((s / std::ldexp(1.0, k)) * m);
    for (int i = 0; i < k; ++i) e = (e * e).eval();
    return e;
}

CMatrix integrated_exp(const CMatrix& m, Real dt) {
    if (!(dt >= 0.0)) throw ValidationError("integrated_exp: dt must be >= 0");
    const auto n = m.rows();
    if (dt == 0.0) return CMatrix::Zero(n, n);
    if (n == 1) {
        const Complex z = -dt * m(0, 0);
        // dt * (e^z - 1) / z, with the series near z = 0.
        if (std::abs(z) < 1e-2) {
            Complex term = 1.0, sum = 1.0;
            for (int j = 2; j <= 9; ++j) {
                term *= z / static_cast<Real>(j);
                sum += term;
            }
            return CMatrix::Constant(1, 1, dt * sum);
        }
        if (z.imag() == 0.0) return CMatrix::Constant(1, 1, dt * std::expm1(z.real()) / z.real());
        return CMatrix::Constant(1, 1, dt * (std::exp(z) - 1.0) / z);
    }
    CMatrix aug = CMatrix::Zero(2 * n, 2 * n);
    aug.topLeftCorner(n, n) = -dt * m;
    aug.topRightCorner(n, n) = dt * CMatrix::Identity(n, n);
    return exp_scaled(aug, 1.0).topRightCorner(n, n);
}

}  // namespace spectracontrol
