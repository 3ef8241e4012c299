#pragma once

#include "spectracontrol/common.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace spectracontrol {

/// Periodized discretization of R^d: a torus of side `period` with `points`
/// samples per axis, carrying C^n-valued samples.
///
/// Storage layout for every per-cell array is row-major over the cell multi-index
/// (axis 0 slowest) with the n components of a cell contiguous. The same layout
/// indexes the frequency lattice: position j on an axis is wavenumber
/// k = j for j < N/2 and k = j - N otherwise, with angular frequency 2*pi*k/Q.
struct GridSpec {
    int dim = 1;
    Real period = 2.0 * kPi;
    int points = 64;
    int value_dim = 1;
    XNorm x_norm = XNorm::Two;
    Real lp_exponent = 2.0;

    /// Throws ValidationError on a non power-of-two N, non-positive Q, p < 1, etc.
    void validate() const;

    std::size_t cells() const;
    std::size_t samples() const { return cells() * static_cast<std::size_t>(value_dim); }
    Real cell_width() const { return period / points; }
    Real cell_measure() const;
    Real volume() const;
    /// Representable band: |xi_j| < nyquist() on every axis.
    Real nyquist() const { return kPi * points / period; }

    int wavenumber(int position) const { return position < points / 2 ? position : position - points; }
    Real axis_frequency(int position) const { return 2.0 * kPi * wavenumber(position) / period; }

    /// Per-axis positions of a flattened cell or lattice index.
    void decode(std::size_t index, std::span<int> positions) const;
    std::size_t encode(std::span<const int> positions) const;
    /// Angular frequency vector of a flattened lattice index.
    std::vector<Real> frequency(std::size_t index) const;
    /// Lattice index of -xi (wavenumbers taken modulo N).
    std::size_t mirror(std::size_t index) const;

    bool operator==(const GridSpec&) const = default;
};

/// Parses the CLI form "d:N:Q:n".
GridSpec parse_grid(const std::string& text);

/// Physical samples and torus Fourier coefficients kept consistent:
///   c(xi) = h^d * sum_x f(x) e^{-i xi.x},   f(x) = Q^{-d} * sum_xi c(xi) e^{i xi.x}.
/// Immutable after construction.
class SpectralField {
public:
    static SpectralField from_values(const GridSpec& grid, std::vector<Complex> values);
    static SpectralField from_coefficients(const GridSpec& grid, std::vector<Complex> coefficients,
                                           std::optional<std::vector<Real>> band = std::nullopt);
    static SpectralField zeros(const GridSpec& grid);
    static SpectralField constant(const GridSpec& grid, std::span<const Complex> value);
    /// e^{i xi.x} v for the lattice frequency with the given per-axis wavenumbers.
    static SpectralField single_mode(const GridSpec& grid, std::span<const int> wavenumbers,
                                     std::span<const Complex> value);

    const GridSpec& grid() const { return grid_; }
    std::span<const Complex> values() const { return values_; }
    std::span<const Complex> coefficients() const { return coefficients_; }
    std::span<const Complex> value_at(std::size_t cell) const;
    std::span<const Complex> coefficient_at(std::size_t index) const;

    /// Set when the field is known to be supported in the open box Pi_lambda.
    const std::optional<std::vector<Real>>& band() const { return band_; }
    SpectralField with_band(std::vector<Real> lambda) const;

    SpectralField scaled(Complex s) const;
    SpectralField conjugated() const;
    SpectralField plus(const SpectralField& other, Complex s = 1.0) const;
    /// Pointwise multiplication by a cell indicator (mask[cell] != 0 keeps the cell).
    SpectralField masked(std::span<const std::uint8_t> mask) const;
    bool is_zero() const;

private:
    SpectralField(GridSpec grid, std::vector<Complex> values, std::vector<Complex> coefficients,
                  std::optional<std::vector<Real>> band);

    GridSpec grid_;
    std::vector<Complex> values_;
    std::vector<Complex> coefficients_;
    std::optional<std::vector<Real>> band_;
};

/// Riemann-scaled forward DFT of raw samples (layout as in GridSpec).
std::vector<Complex> forward_transform(const GridSpec& grid, std::span<const Complex> values);
/// Torus inversion c -> Q^{-d} sum c e^{i xi.x}.
std::vector<Complex> inverse_transform(const GridSpec& grid, std::span<const Complex> coefficients);

/// Recomputes coefficients from the physical samples of `field`.
SpectralField forward_transform(const SpectralField& field);

/// (sum_cells h^d ||f(x)||_q^p)^{1/p}, or the max over cells for p = inf.
Real lp_norm(const SpectralField& field);
Real lp_norm(const SpectralField& field, Real p);
/// Norm of 1_mask * f without materializing the product.
Real lp_norm(const GridSpec& grid, std::span<const Complex> values, Real p,
             std::span<const std::uint8_t> mask = {});

/// Open-box membership |xi_i| < lambda_i / 2 for every axis.
bool in_box(const GridSpec& grid, std::size_t index, std::span<const Real> lambda);
/// Number of lattice frequencies inside Pi_lambda.
std::size_t modes_in_box(const GridSpec& grid, std::span<const Real> lambda);
/// Rejects lambda with lambda_i / 2 beyond the Nyquist band or non-positive entries.
void check_resolvable(const GridSpec& grid, std::span<const Real> lambda);

/// Zeroes coefficients outside Pi_lambda and resynthesizes; result is flagged band-limited.
SpectralField band_limit(const SpectralField& field, std::span<const Real> lambda);

/// i.i.d. complex standard normal coefficients inside Pi_lambda, zero outside.
SpectralField random_band_limited(const GridSpec& grid, std::span<const Real> lambda, std::uint64_t seed);
/// i.i.d. complex standard normal physical samples (all lattice modes excited).
SpectralField white_noise(const GridSpec& grid, std::uint64_t seed);

/// Coefficients multiplied by (i xi)^alpha. Preserves the band flag.
SpectralField spectral_derivative(const SpectralField& field, const MultiIndex& alpha);

}  // namespace spectracontrol
