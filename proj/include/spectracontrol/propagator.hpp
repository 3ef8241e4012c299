#pragma once

#include "spectracontrol/elliptic_symbols.hpp"
#include "spectracontrol/spectral_grid.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace spectracontrol {

/// One n x n block per lattice frequency, acting on coefficients.
struct FrequencyMultiplier {
    GridSpec grid;
    std::vector<CMatrix> blocks;

    std::vector<Complex> apply(std::span<const Complex> coefficients) const;
    /// c(xi) -> B(xi)^* c(xi): the adjoint for the Hilbert pairing sum h^d <f(x), g(x)>.
    std::vector<Complex> apply_hilbert_adjoint(std::span<const Complex> coefficients) const;
    /// c(xi) -> B(-xi)^T c(xi): the Banach transpose for the bilinear pairing sum h^d f(x).g(x).
    std::vector<Complex> apply_transpose(std::span<const Complex> coefficients) const;

    SpectralField apply(const SpectralField& f) const;
};

/// V_t = S_t(D) on a grid, S_t(xi) = exp(-t a(xi)) for every lattice frequency. Immutable.
class Propagator {
public:
    Propagator(const OperatorSymbol& symbol, const GridSpec& grid, Real t);

    Real time() const { return t_; }
    const FrequencyMultiplier& multiplier() const { return mult_; }
    const CMatrix& at(std::size_t index) const { return mult_.blocks[index]; }

    SpectralField apply(const SpectralField& f) const;
    /// W_t = V_t' (transpose at the mirrored frequency).
    SpectralField apply_transpose(const SpectralField& f) const;
    /// V_t^* (Hilbert adjoint).
    SpectralField apply_hilbert_adjoint(const SpectralField& f) const;

private:
    Real t_;
    FrequencyMultiplier mult_;
};

/// Shared propagator from an internally synchronized LRU cache keyed by (symbol, grid, t).
std::shared_ptr<const Propagator> propagator_for(const OperatorSymbol& symbol, const GridSpec& grid, Real t);
void clear_propagator_cache();

/// exp(-t a(xi)).
CMatrix propagator_matrix(const OperatorSymbol& symbol, std::span<const Real> xi, Real t);

SpectralField apply_propagator(const OperatorSymbol& symbol, const SpectralField& f, Real t);
/// Banach adjoint W_t = V_t': coefficients c(xi) -> S_t(-xi)^T c(xi).
SpectralField adjoint_propagator(const OperatorSymbol& symbol, const SpectralField& f, Real t);
/// Hilbert adjoint V_t^*: coefficients c(xi) -> S_t(xi)^* c(xi).
SpectralField hilbert_adjoint_propagator(const OperatorSymbol& symbol, const SpectralField& f, Real t);

/// Bilinear grid pairing sum_x h^d f(x).g(x).
Complex bilinear_pairing(const SpectralField& f, const SpectralField& g);
/// Sesquilinear grid pairing sum_x h^d <f(x), g(x)> (conjugate-linear in f).
Complex hilbert_pairing(const SpectralField& f, const SpectralField& g);

/// a(D) f.
SpectralField apply_symbol(const OperatorSymbol& symbol, const SpectralField& f);

// ---------------------------------------------------------------------------
// Frequency cutoffs

/// chi_lambda(xi) = phi(|xi| / lambda): equal to 1 for |xi| <= lambda/2, 0 for |xi| >= lambda.
struct CutoffSpec {
    Real lambda = 1.0;

    Real chi(std::span<const Real> xi) const;
};

SpectralField apply_cutoff(const SpectralField& f, const CutoffSpec& spec, bool complement = false);

// ---------------------------------------------------------------------------
// Probes

/// d^alpha F(xi) by tensor central differences with step h and h/2, Richardson-combined.
struct FiniteDifference {
    CMatrix value;
    bool converged = true;
    Real discrepancy = 0.0;  // ||D_h - D_{h/2}|| / max(||D||, tiny)
};
FiniteDifference fd_derivative(const std::function<CMatrix(std::span<const Real>)>& fn, std::span<const Real> xi,
                               const MultiIndex& alpha, Real h);

struct DecayRow {
    Real t = 0.0;
    std::vector<Real> xi;
    Real lhs = 0.0;       // ||d^alpha S_t(xi)||
    Real envelope = 0.0;  // e^{omega t - mu |xi|^m t}
    Real ratio = 0.0;
    bool converged = true;
};

struct DecayProbe {
    MultiIndex alpha;
    Real omega = 0.0;
    Real mu = 0.0;
    Real K_alpha = 0.0;  // smallest K with lhs <= K * envelope on every row
    bool holds = false;  // K_alpha finite and every finite-difference point converged
    std::vector<DecayRow> rows;
};

/// Requires a passing report with perturbation parameters; uses (omega, gamma / 2).
DecayProbe symbol_decay_probe(const OperatorSymbol& symbol, const EllipticityReport& report, const MultiIndex& alpha,
                              std::span<const Real> t_grid, const std::vector<std::vector<Real>>& xi_grid);

struct OperatorNormEstimate {
    Real estimate = 0.0;  // max ratio over the ensemble (a lower bound)
    std::size_t starts = 0;
    int iterations = 0;
};

/// Ensemble lower bound for ||T||_{L^p -> L^p} of a frequency multiplier T: random start fields
/// refined by power iteration of T^* T, the L^p ratio taken at every iterate.
OperatorNormEstimate estimate_operator_norm(const FrequencyMultiplier& T, Real p, std::size_t starts,
                                            int max_iterations, std::uint64_t seed);

/// max_xi ||B(xi)||_2: the exact L^2 -> L^2 norm of a multiplier when the X-norm is Euclidean.
Real parseval_norm(const FrequencyMultiplier& T);

struct DissipationRow {
    Real t = 0.0;
    Real lambda = 0.0;
    Real estimate = 0.0;             // ensemble lower bound
    std::optional<Real> exact;       // Parseval value when p = 2 and q = 2
    Real bound = 0.0;                // c1 e^{-c2 t lambda^m} with the fitted constants
};

struct DissipationProbe {
    Real p = 2.0;
    int m = 2;
    Real c1 = 0.0;
    Real c2 = 0.0;
    Real lambda0 = 0.0;
    bool fit_found = false;
    std::vector<DissipationRow> rows;
};

struct DissipationOptions {
    std::size_t ensemble = 64;
    int power_iterations = 64;
    std::uint64_t seed = 0;
};

/// Probes ||(I - P_lambda) V_t||_{L^p -> L^p} on the grid (p from the grid) and fits
/// c1 = max norm, c2 = min log(c1 / norm) / (t lambda^m) over t > 0 and lambda >= lambda0,
/// lambda0 the smallest grid value giving c2 > 0.
DissipationProbe dissipation_probe(const OperatorSymbol& symbol, const GridSpec& grid, std::span<const Real> lambda_grid,
                                   std::span<const Real> t_grid, const DissipationOptions& options = {});

struct ExponentFit {
    std::vector<Real> lambdas;
    std::vector<Real> rates;  // per lambda: slope of -log norm against t
    Real exponent = 0.0;      // slope of log rate against log lambda
};

/// Decay-rate exponent on the scaled grid t = u / lambda^m (exact Parseval norms when
/// p = q = 2, ensemble estimates otherwise).
ExponentFit dissipation_exponent(const OperatorSymbol& symbol, const GridSpec& grid, std::span<const Real> lambda_grid,
                                 std::span<const Real> u_grid, const DissipationOptions& options = {});

struct GeneratorRow {
    Real t = 0.0;
    Real r = 0.0;
};

struct GeneratorCheck {
    bool skipped = false;  // a(D) f = 0
    std::vector<GeneratorRow> rows;
    Real C = 0.0;      // max r(t) / t
    Real order = 0.0;  // least-squares slope of log r against log t
};

GeneratorCheck generator_check(const OperatorSymbol& symbol, const SpectralField& f, std::span<const Real> t_grid);

struct MultiplierSeminorm {
    Real sobolev = 0.0;  // max_{|alpha| <= d+1} sup ||d^alpha m||
    Real decay = 0.0;    // max_{|alpha| <= d+1} sup |xi|^{|alpha| + eps} ||d^alpha m||
    Real mu = 0.0;
    Real kernel_l1 = 0.0;  // ||F^{-1} m||_{L^1} on the grid
    Real ratio = 0.0;      // kernel_l1 / mu (0 when mu = 0)
};

/// mu estimated on the lattice of `grid` (derivatives by finite differences), paired with
/// the grid L^1 norm of the periodized kernel.
MultiplierSeminorm multiplier_seminorm(const GridSpec& grid, const std::function<CMatrix(std::span<const Real>)>& m,
                                       Real eps = 0.5);

}  // namespace spectracontrol
