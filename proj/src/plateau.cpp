#include "spectracontrol/plateau.hpp"

#include <cmath>

namespace spectracontrol {

GaussRule gauss_legendre(int n) {
    GaussRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        Real x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        Real dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            Real p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const Real p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const Real dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // Recompute the derivative at the converged node.
        Real p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const Real p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const Real w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[static_cast<std::size_t>(i)] = -x;
        rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        rule.weights[static_cast<std::size_t>(i)] = w;
        rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
    return rule;
}

Real mollifier(Real u) {
    const Real a = std::abs(u);
    if (a >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - u * u));
}

namespace {
constexpr Real kInner = 0.75;  // half-width of the indicator
constexpr Real kWidth = 0.25;  // mollifier radius
constexpr int kPanels = 8;
}  // namespace

SmoothPlateau::SmoothPlateau() : rule_(gauss_legendre(32)), mass_(0.0) {
    Real acc = 0.0;
    for (int p = 0; p < kPanels; ++p) {
        const Real a = -1.0 + 2.0 * p / kPanels;
        const Real b = a + 2.0 / kPanels;
        for (std::size_t i = 0; i < rule_.nodes.size(); ++i)
            acc += 0.5 * (b - a) * rule_.weights[i] * mollifier(0.5 * (b - a) * rule_.nodes[i] + 0.5 * (a + b));
    }
    mass_ = acc;
}

Real SmoothPlateau::cumulative(Real t) const {
    if (t <= -1.0) return 0.0;
    if (t >= 1.0) return 1.0;
    if (t > 0.0) return 1.0 - upper_tail(t);
    Real acc = 0.0;
    for (int p = 0; p < kPanels; ++p) {
        const Real a = -1.0 + (t + 1.0) * p / kPanels;
        const Real b = -1.0 + (t + 1.0) * (p + 1) / kPanels;
        for (std::size_t i = 0; i < rule_.nodes.size(); ++i)
            acc += 0.5 * (b - a) * rule_.weights[i] * mollifier(0.5 * (b - a) * rule_.nodes[i] + 0.5 * (a + b));
    }
    return acc / mass_;
}

Real SmoothPlateau::upper_tail(Real t) const {
    // Integral of the normalized mollifier over (t, 1); symmetric to cumulative(-t).
    if (t >= 1.0) return 0.0;
    if (t <= -1.0) return 1.0;
    if (t < 0.0) return 1.0 - cumulative(t);
    return cumulative(-t);
}

Real SmoothPlateau::operator()(Real s) const {
    const Real a = std::abs(s);
    if (a <= 0.5) return 1.0;
    if (a >= 1.0) return 0.0;
    return cumulative((kInner - a) / kWidth);
}

Real SmoothPlateau::complement(Real s) const {
    const Real a = std::abs(s);
    if (a <= 0.5) return 0.0;
    if (a >= 1.0) return 1.0;
    return upper_tail((kInner - a) / kWidth);
}

const SmoothPlateau& plateau() {
    static const SmoothPlateau instance;
    return instance;
}

}  // namespace spectracontrol
