#pragma once

#include "spectracontrol/spectral_grid.hpp"
#include "spectracontrol/thick_sets.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace spectracontrol {

// ---------------------------------------------------------------------------
// Spectral inequality probes

/// Surrogate constant used by the frozen-K acceptance runs. Calibrated once against a
/// dense independent sweep (largest fitted K observed there was well below this).
inline constexpr Real kFrozenLsConstant = 10.0;

/// (rho / K)^{K (d + L.lambda)}.
Real ls_bound(Real rho, Real K, int dim, Real L_dot_lambda);

/// Smallest K >= 1 with ratio >= ls_bound(rho, K, ...). Returns 1 when ratio >= rho^{d + L.lambda}.
Real fit_ls_constant(Real ratio, Real rho, int dim, Real L_dot_lambda);

struct LSProbeResult {
    Real ratio = 0.0;  // ||1_E f||_p / ||f||_p
    Real rho = 0.0;
    std::vector<Real> L;
    std::vector<Real> lambda;
    int dim = 1;
    Real fitted_K = 1.0;

    Real L_dot_lambda() const;
    Real bound(Real K) const { return ls_bound(rho, K, dim, L_dot_lambda()); }
};

/// Requires a band-flagged nonzero field and a certified set.
LSProbeResult ls_ratio(const SpectralField& f, const ThickSet& E);

struct LSEnsemble {
    std::vector<LSProbeResult> samples;
    Real min_ratio = 0.0;
    Real fitted_K = 1.0;  // smallest K valid for every sample
};

/// Random band-limited ensemble drawn from seeds seed, seed+1, ...
LSEnsemble ls_probe_ensemble(const GridSpec& grid, const ThickSet& E, std::span<const Real> lambda, int count,
                             std::uint64_t seed);

// ---------------------------------------------------------------------------
// Bernstein inequality

/// C_2 = sup_j ||d_j F^{-1} phi||_{L^1(R^d)} for the tensor-product plateau phi.
/// In one dimension this is ||g'||_{L^1(R)} with g = F^{-1} phi_1; in d dimensions the
/// other factors contribute ||g||_{L^1(R)}^{d-1}. Computed by bracketed Gauss-Legendre
/// quadrature between the zeros of the integrand and cached. `resolution` scales every
/// quadrature parameter (1 = default).
Real compute_C2(int dim = 1, int resolution = 1);
/// ||F^{-1} phi_1||_{L^1(R)}.
Real plateau_kernel_l1(int resolution = 1);

struct BernsteinRecord {
    MultiIndex alpha;
    Real lhs = 0.0;          // ||d^alpha f||_p
    Real rhs = 0.0;          // C_2^{|alpha|} lambda^alpha ||f||_p
    Real norm = 0.0;         // ||f||_p
    bool holds = false;
    std::optional<Real> sharp_rhs;  // (lambda/2)^alpha ||f||_2, p = 2 only
    bool sharp_holds = true;
    /// (rhs - lhs) / rhs for the sharpest available bound.
    Real slack = 0.0;
};

/// Tolerance on the relative slack of the Bernstein checks.
inline constexpr Real kBernsteinSlack = 1e-10;

BernsteinRecord bernstein_check(const SpectralField& f, const MultiIndex& alpha);

// ---------------------------------------------------------------------------
// Good / bad unit cubes

/// 1 / (1 - (2^d + 1)^{-1/d}); the cube constant A must exceed it.
Real cube_constant_floor(int dim);
/// 1 - (2^{-d} [(1 - 1/A)^{-d} - 1])^{1/p} for finite p, 1 for p = inf.
Real good_mass_constant(Real A, int dim, Real p);

struct CubeClassification {
    std::vector<int> cube;       // k in Z^d, cube = [k, k+1)^d on the torus
    bool good = true;
    MultiIndex worst_alpha;      // alpha attaining worst_ratio
    Real worst_ratio = 0.0;      // max over alpha of lhs / rhs; bad iff >= 1
    Real local_norm = 0.0;       // ||1_{Lambda_k} f||_p
    int alpha_max = 0;
};

struct CubeReport {
    std::vector<CubeClassification> cubes;
    Real A = 0.0;
    Real C2 = 0.0;
    Real C3 = 0.0;
    Real p = 2.0;
    /// Bound on the fraction ||1_bad' f||_p^p / ||f||_p^p that cubes bad only through
    /// untested orders |alpha| > alpha_max could carry (p-th root taken for reporting).
    Real tail_bound = 0.0;
    Real good_norm = 0.0;   // ||1_good f||_p
    Real total_norm = 0.0;  // ||f||_p
    bool good_mass_holds = false;  // good_norm >= C3 * total_norm

    std::size_t good_count() const;
};

/// Classifies every unit cube using all orders 0 < |alpha| <= alpha_max.
/// Requires an integer period with N/Q integral so unit cubes tile the cells.
CubeReport classify_cubes(const SpectralField& f, Real A, int alpha_max);

struct PointBoundResult {
    bool found = false;
    std::size_t witness_cell = 0;
    /// Smallest over sampled points of the worst lhs/rhs ratio across alpha.
    Real best_ratio = 0.0;
};

/// Searches the grid samples of cube k for a point x with
/// ||d^alpha f(x)|| <= 4^d B^{|alpha|} (C_2 lambda)^alpha ||1_{Lambda_k} f||_p for all |alpha| <= alpha_max.
PointBoundResult good_cube_point_bound(const SpectralField& f, std::span<const int> cube, Real B, int alpha_max);

// ---------------------------------------------------------------------------
// Remez-type lemma for vector-valued polynomials

struct Interval {
    Real lo = 0.0;
    Real hi = 0.0;
    Real length() const { return hi - lo; }
};

struct RemezResult {
    Real M = 0.0;          // sup over |z| <= 5 of ||f||, after normalization
    Real exponent = 0.0;   // ln M / ln 2
    Real sup_I = 0.0;      // before normalization
    Real sup_A = 0.0;      // after normalization
    Real measure_A = 0.0;
    /// Smallest C_1 with sup_A ||f|| >= (|A|/C_1)^{ln M / ln 2} sup_I ||f||.
    Real fitted_C1 = 0.0;
};

/// coefficients[j] is the C^n coefficient of z^j. I must have length 1 and contain 0;
/// A is a finite union of subintervals of I with positive measure.
RemezResult remez_probe(const std::vector<CVector>& coefficients, XNorm q, Interval I, std::vector<Interval> A,
                        int boundary_samples = 4096);

}  // namespace spectracontrol
