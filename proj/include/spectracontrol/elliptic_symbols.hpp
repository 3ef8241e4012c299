#pragma once

#include "spectracontrol/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace spectracontrol {

struct SymbolTerm {
    MultiIndex alpha;
    CMatrix coefficient;
};

/// Constant-coefficient matrix polynomial a(xi) = sum_alpha a_alpha xi^alpha of degree m.
class OperatorSymbol {
public:
    OperatorSymbol(int order, int dim, int value_dim, std::vector<SymbolTerm> terms);

    int order() const { return order_; }
    int dim() const { return dim_; }
    int value_dim() const { return value_dim_; }
    /// Terms with distinct multi-indices, graded by |alpha|; zero coefficients dropped.
    const std::vector<SymbolTerm>& terms() const { return terms_; }

    CMatrix evaluate(std::span<const Real> xi) const;
    /// Only the |alpha| = m terms.
    OperatorSymbol principal() const;
    /// a - a_m (degree below m; may be the zero polynomial).
    OperatorSymbol lower_order() const;
    /// d^beta a, as a polynomial of nominal order max(m - |beta|, 0).
    OperatorSymbol derivative(const MultiIndex& beta) const;
    OperatorSymbol scaled(Complex s) const;
    /// U a_alpha U^* for every coefficient.
    OperatorSymbol conjugated_by(const CMatrix& unitary) const;
    /// Highest |alpha| with a nonzero coefficient, -1 for the zero polynomial.
    int degree() const;
    bool is_zero() const { return terms_.empty(); }

    /// Stable textual identity, used as a cache key.
    const std::string& fingerprint() const { return fingerprint_; }

    /// Scalar heat symbol |xi|^2 (times identity on C^n).
    static OperatorSymbol heat(int dim, int value_dim = 1);
    /// (|xi|^2)^k times identity: order 2k.
    static OperatorSymbol polyharmonic(int dim, int k, int value_dim = 1);

private:
    OperatorSymbol(int order, int dim, int value_dim, std::vector<SymbolTerm> terms, bool allow_degenerate);
    void finalize(bool allow_degenerate);

    int order_;
    int dim_;
    int value_dim_;
    std::vector<SymbolTerm> terms_;
    std::string fingerprint_;
};

/// Sector parameters (M, phi, mu).
struct Sector {
    Real M = 0.0;
    Real phi = 0.0;
    Real mu = 0.0;
};

/// (2 kappa + 1, pi - arctan(2 kappa), -1 / (2 kappa)).
Sector derived_sector(Real kappa);

/// Sigma_{theta, omega}: |arg(lambda - omega)| <= theta, together with the origin.
bool in_sector(Complex lambda, Real theta, Real omega);

struct PerturbationParams {
    Real gamma = 0.0;
    Real omega = 0.0;
    Real M_prime = 0.0;  // 4 kappa + 2
    Real worst_neumann = 0.0;  // largest sampled ||(a - a_m)(lambda + a_m)^{-1}|| at the accepted omega
    int doublings = 0;
};

struct EllipticityWitness {
    std::vector<Real> xi;
    Complex lambda;
    std::string reason;
};

struct SeminormEntry {
    MultiIndex alpha;
    Real value = 0.0;
};

struct EllipticityReport {
    bool pass = false;
    Real kappa = kInf;
    XNorm q = XNorm::Two;
    std::optional<Sector> sector;
    std::optional<PerturbationParams> perturbation;
    std::vector<SeminormEntry> seminorms;  // |alpha| <= d + 1
    std::optional<EllipticityWitness> witness;
    std::size_t sphere_samples = 0;
    std::size_t lambda_samples = 0;
    /// Certified bound for |lambda| beyond the sampled range.
    Real tail_bound = 0.0;
    Real lambda_max = 0.0;
};

/// Points on the unit sphere in R^d: both points for d = 1, equispaced angles for d = 2,
/// a Halton-driven Gaussian projection otherwise.
std::vector<std::vector<Real>> sphere_points(int dim, std::size_t count);

struct EllipticityOptions {
    std::size_t sphere_samples = 0;   // 0 selects 256 d
    std::size_t lambda_samples = 400;  // per ray
    XNorm q = XNorm::Two;
    bool with_perturbation = true;
};

/// Certifies (kappa, pi/2, 0)-ellipticity on samples. A pass report also carries the
/// derived sector, the perturbation parameters and the seminorms.
EllipticityReport check_normal_ellipticity(const OperatorSymbol& symbol, const EllipticityOptions& options = {});

/// Doubling search for omega on the sampled Neumann condition. Throws NumericalFailure
/// past the search cap.
PerturbationParams perturbation_params(const OperatorSymbol& symbol, const EllipticityReport& report);

/// N_alpha(a) = max_{beta <= alpha} sup_xi ||d^beta a(xi)|| / (1 + |xi|)^{m - |beta|}.
Real seminorm_N(const OperatorSymbol& symbol, const MultiIndex& alpha, XNorm q = XNorm::Two);

}  // namespace spectracontrol
