#pragma once

#include "spectracontrol/common.hpp"

namespace spectracontrol {

/// Largest ||M||_1 accepted by matrix_exp: 1e4 * ln(DBL_MAX).
Real matrix_exp_limit();

/// exp(M) by Pade scaling and squaring (degree up to 13). Throws NumericalFailure when
/// ||M||_1 exceeds matrix_exp_limit(); callers rescale instead (see exp_scaled).
CMatrix matrix_exp(const CMatrix& m);

/// exp(s * M) for s >= 0, computed as exp(s M / 2^k)^(2^k) when s M is too large for
/// a direct call.
CMatrix exp_scaled(const CMatrix& m, Real s);

/// int_0^dt exp(-s M) ds = dt * phi_1(-dt M), read off the augmented exponential
/// exp([[-dt M, dt I], [0, 0]]).
CMatrix integrated_exp(const CMatrix& m, Real dt);

}  // namespace spectracontrol
