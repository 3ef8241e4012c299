#pragma once

#include "spectracontrol/spectral_grid.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace spectracontrol {

struct ThicknessCertificate {
    Real rho = 0.0;
    std::vector<Real> L;
};

/// Cell-indicator subset E of the torus. When certified, every periodic translate
/// of the box (0, L_1) x ... x (0, L_d) meets E in measure >= rho * prod L_i.
class ThickSet {
public:
    ThickSet(GridSpec grid, std::vector<std::uint8_t> indicator,
             std::optional<ThicknessCertificate> certificate = std::nullopt);

    const GridSpec& grid() const { return grid_; }
    std::span<const std::uint8_t> indicator() const { return indicator_; }
    const std::optional<ThicknessCertificate>& certificate() const { return certificate_; }

    std::size_t count() const;
    /// |E| / Q^d.
    Real density() const;
    bool empty() const { return count() == 0; }

    /// Re-verifies and attaches the certificate for the given L (rho = verified minimum).
    ThickSet certified(std::span<const Real> L) const;

private:
    GridSpec grid_;
    std::vector<std::uint8_t> indicator_;
    std::optional<ThicknessCertificate> certificate_;
};

/// Number of whole cells spanned by a cell-aligned length; throws if misaligned.
int aligned_cells(const GridSpec& grid, Real length, const char* what);

/// Minimum over all grid-aligned periodic translates x of |E n (box + x)| / prod L_i.
/// Exact for cell-aligned L because the covered measure is multilinear between grid shifts.
Real verify_thickness(const ThickSet& set, std::span<const Real> L);

/// Axis-aligned periodic stripes, on for (x_axis mod period) in [0, on_width).
ThickSet make_stripes(const GridSpec& grid, Real on_width, Real period, int axis);

/// In each L-block a uniformly random ceil(rho_target * cells_per_block)-subset is switched on.
ThickSet make_random_thick(const GridSpec& grid, Real rho_target, std::span<const Real> L, std::uint64_t seed);

}  // namespace spectracontrol
