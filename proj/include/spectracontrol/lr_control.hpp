#pragma once

#include "spectracontrol/elliptic_symbols.hpp"
#include "spectracontrol/propagator.hpp"
#include "spectracontrol/spectral_grid.hpp"
#include "spectracontrol/thick_sets.hpp"

#include <optional>
#include <string>
#include <vector>

namespace spectracontrol {

/// Piecewise-constant control: values[k] acts on [knots[k], knots[k+1]).
struct ControlSignal {
    std::vector<Real> knots;
    std::vector<SpectralField> values;

    std::size_t segments() const { return values.size(); }
    /// Each segment split into `factor` equal pieces carrying the same value.
    ControlSignal refined(int factor) const;
    /// Zero control on a uniform grid of `steps` segments over [0, T].
    static ControlSignal zero(const GridSpec& grid, Real T, int steps);
};

struct Trajectory {
    std::vector<Real> times;
    std::vector<SpectralField> states;
};

/// Exponential-integrator solution of y' + a(D) y = 1_E u, y(0) = y0, with u piecewise constant:
///   y_{k+1} = V_dt y_k + int_0^dt V_{dt-s} ds (1_E u_k).
/// Across zero-control segments the state is propagated from the last controlled knot in one
/// step, so u = 0 reproduces apply_propagator exactly.
Trajectory simulate_mild(const OperatorSymbol& symbol, const SpectralField& y0, const ThickSet& E,
                         const ControlSignal& u);

/// ||u||_{L^r([0,T]; L^p)} for a piecewise-constant signal (exact integral).
Real control_cost(const ControlSignal& u, Real p, Real r);

// ---------------------------------------------------------------------------
// Observability

struct ObservabilityOptions {
    std::size_t ensemble = 32;   // half band-limited, half rough
    int min_nodes = 128;         // trapezoid intervals on [0, T]
    Real node_spacing = 0.0;     // when > 0, intervals = max(min_nodes, ceil(T / node_spacing))
    std::uint64_t seed = 0;
    bool adjoint = false;        // use W_t and the dual norms
};

struct ObservabilitySample {
    Real terminal = 0.0;  // ||V_T f||
    Real observed = 0.0;  // ||V_(.) f||_{L^r([0,T]; L^p(E))}
    Real ratio = 0.0;
};

struct ObservabilityEstimate {
    Real C_obs_hat = 0.0;
    bool bounded = true;
    std::size_t ensemble = 0;
    int intervals = 0;
    Real p = 2.0;
    Real r = 2.0;
    std::vector<ObservabilitySample> samples;
};

/// Lower bound for the observability constant on an ensemble of fields over E's grid.
/// With options.adjoint, W_t replaces V_t and (p, r) are the exponents used as given.
ObservabilityEstimate observability_probe(const OperatorSymbol& symbol, const ThickSet& E, Real T, Real p, Real r,
                                          const ObservabilityOptions& options = {});

// ---------------------------------------------------------------------------
// Lebeau-Robbiano synthesis

struct StageSpec {
    Real lambda = 0.0;
    Real start = 0.0;
    Real active = 0.0;
    Real passive = 0.0;
};

/// Band caps of lr_schedule.
struct ScheduleLimits {
    Real nyquist = kInf;
    /// Stages beyond the first require #{xi : |xi| < lambda} <= fill * (cells of E).
    std::size_t observed_cells = 0;
    Real fill = 0.75;
};

/// lambda_j = 2^j lambda0 below the Nyquist band (later stages also below the observable cap),
/// tau_j proportional to 2^{-j} with sum 2 tau_j = T; each stage is half active, half passive.
std::vector<StageSpec> lr_schedule(Real T, Real lambda0, const GridSpec& grid, const ScheduleLimits& limits);
/// Limits for the problem grid and set.
ScheduleLimits schedule_limits(const GridSpec& grid, const ThickSet& E);

struct CgOptions {
    Real tolerance = 1e-10;
    Real shift = 1e-12;
    int stagnation_window = 500;
    int max_iterations = 20000;
};

/// Raised when a stage cannot meet its low-frequency postcondition.
class StageFailure : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

struct StageResult {
    std::vector<SpectralField> controls;  // one per step, supported on E
    SpectralField end_state;              // state after the active interval
    int cg_iterations = 0;
    Real cg_residual = 0.0;   // relative CG residual
    Real residual = 0.0;      // ||Pi_lambda y(tau)||_2 / ||y||_2
    Real gramian_energy = 0.0;  // sum_k dt ||u_k||_2^2
};

/// Minimal-energy discrete control annihilating the modes |xi| < lambda over one active interval
/// of length tau split into `steps` constant pieces. Throws StageFailure on CG stagnation or
/// when the residual exceeds 1e-8.
StageResult stage_control(const OperatorSymbol& symbol, const SpectralField& y, Real lambda, Real tau, const ThickSet& E,
                          int steps, const CgOptions& cg = {});

struct ControlProblem {
    OperatorSymbol symbol;
    SpectralField y0;
    ThickSet E;
    Real T = 1.0;
    Real r = 2.0;
    Real eps_target = 1e-6;
    int time_steps = 32;  // per active interval
    Real lambda0 = 4.0;
    CgOptions cg{};
};

struct StageRecord {
    Real lambda = 0.0;
    Real start = 0.0;
    Real active = 0.0;
    Real passive = 0.0;
    int cg_iterations = 0;
    Real residual = 0.0;
};

struct TrajectoryRow {
    Real t = 0.0;
    Real state_norm = 0.0;
    Real control_norm = 0.0;  // on the segment starting at t (0 at T)
};

struct ControlOutcome {
    ControlSignal u;
    Real initial_norm = 0.0;
    Real terminal_norm = 0.0;
    Real relative = 0.0;
    Real refined_relative = 0.0;  // recomputed at 2x time resolution
    Real cost = 0.0;
    bool success = false;
    bool approximate = false;  // p = 1 semantics
    std::vector<StageRecord> stages;
    std::vector<TrajectoryRow> trajectory;
};

ControlOutcome synthesize_control(const ControlProblem& problem);

// ---------------------------------------------------------------------------
// Duality

struct DualityReport {
    Real p = 2.0, r = 2.0, q = 2.0, s = 2.0;
    ObservabilityEstimate forward;
    ObservabilityEstimate adjoint;
    bool ensemble_bound_holds = false;  // every adjoint sample satisfies ||W_T f|| <= C ||W f||
    std::optional<Real> control_cost;
    std::optional<Real> cost_bound;  // C_obs_hat(W) ||y0||_p (1 + 0.1)
    std::optional<bool> cost_bound_holds;
};

/// q, s are the Hoelder conjugates of p = grid exponent and r. When `outcome` is given, its cost
/// is compared against C_obs_hat(W) ||y0||_p (1 + 0.1).
DualityReport duality_check(const OperatorSymbol& symbol, const ThickSet& E, Real T, Real r,
                            const ObservabilityOptions& options, const ControlOutcome* outcome = nullptr);

}  // namespace spectracontrol
