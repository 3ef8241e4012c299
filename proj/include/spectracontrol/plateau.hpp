#pragma once

#include "spectracontrol/common.hpp"

#include <vector>

namespace spectracontrol {

struct GaussRule {
    std::vector<Real> nodes;    // on [-1, 1]
    std::vector<Real> weights;
};

/// n-point Gauss-Legendre rule, nodes ascending.
GaussRule gauss_legendre(int n);

/// Standard mollifier exp(-1/(1-u^2)) on (-1, 1), unnormalized.
Real mollifier(Real u);

/// The smooth plateau used both as the Bernstein bump and the radial cutoff profile:
/// the indicator of [-3/4, 3/4] convolved with the normalized mollifier of width 1/4.
/// Equal to 1 on [-1/2, 1/2], 0 outside (-1, 1), C-infinity, even, and monotone on [0, 1].
class SmoothPlateau {
public:
    SmoothPlateau();

    Real operator()(Real s) const;
    /// 1 - value(s), computed without cancellation near the plateau edge.
    Real complement(Real s) const;

    /// Normalizing constant of the mollifier, integral over (-1, 1).
    Real mollifier_mass() const { return mass_; }

private:
    /// Integral of the normalized mollifier over (-1, t).
    Real cumulative(Real t) const;
    Real upper_tail(Real t) const;

    GaussRule rule_;
    Real mass_;
};

const SmoothPlateau& plateau();

}  // namespace spectracontrol
