#include "spectracontrol/lr_control.hpp"

#include "spectracontrol/matrix_exp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <sstream>

namespace spectracontrol {

namespace {

Real coefficient_l2(std::span<const Complex> c) {
    Real s = 0.0;
    for (const auto& z : c) s += std::norm(z);
    return std::sqrt(s);
}

Complex dot(std::span<const Complex> a, std::span<const Complex> b) {
    Complex s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

/// int_0^dt V_s ds per frequency, cached by (symbol, grid, dt).
std::shared_ptr<const FrequencyMultiplier> integrated_multiplier(const OperatorSymbol& symbol, const GridSpec& grid,
                                                                 Real dt) {
    static std::mutex mutex;
    static std::map<std::string, std::shared_ptr<const FrequencyMultiplier>> cache;
    char buf[160];
    std::snprintf(buf, sizeof buf, "#%d:%d:%a:%d:%a", grid.dim, grid.points, grid.period, grid.value_dim, dt);
    const std::string key = symbol.fingerprint() + buf;
    {
        std::lock_guard lock(mutex);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }
    auto made = std::make_shared<FrequencyMultiplier>();
    made->grid = grid;
    made->blocks.resize(grid.cells());
    parallel_for(grid.cells(), [&](std::size_t k) {
        made->blocks[k] = integrated_exp(symbol.evaluate(grid.frequency(k)), dt);
    });
    std::lock_guard lock(mutex);
    if (cache.size() > 64) cache.clear();
    cache.emplace(key, made);
    return made;
}

/// Coefficients of F(1_E u).
std::vector<Complex> masked_coefficients(const SpectralField& u, const ThickSet& E) {
    return forward_transform(u.grid(), u.masked(E.indicator()).values());
}

std::vector<Complex> add(std::span<const Complex> a, std::span<const Complex> b) {
    std::vector<Complex> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

void check_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
    if (!(a == b)) throw ValidationError(std::string(what) + ": fields and set live on different grids");
}

/// ||f||_{L^p(mask; X)} with an explicit X-norm.
Real norm_with(const GridSpec& grid, std::span<const Complex> values, Real p, XNorm x, std::span<const std::uint8_t> mask = {}) {
    GridSpec g = grid;
    g.x_norm = x;
    return lp_norm(g, values, p, mask);
}

}  // namespace

// ---------------------------------------------------------------------------
// Controls and mild solutions

ControlSignal ControlSignal::refined(int factor) const {
    if (factor < 1) throw ValidationError("refined: factor must be >= 1");
    ControlSignal out;
    if (knots.empty()) return out;
    out.knots.push_back(knots.front());
    for (std::size_t k = 0; k < values.size(); ++k) {
        const Real a = knots[k], b = knots[k + 1];
        for (int j = 1; j <= factor; ++j) {
            out.knots.push_back(j == factor ? b : a + (b - a) * j / factor);
            out.values.push_back(values[k]);
        }
    }
    return out;
}

ControlSignal ControlSignal::zero(const GridSpec& grid, Real T, int steps) {
    if (!(T > 0.0) || steps < 1) throw ValidationError("zero control: need T > 0 and steps >= 1");
    ControlSignal out;
    for (int k = 0; k <= steps; ++k) out.knots.push_back(k == steps ? T : T * k / steps);
    out.values.assign(static_cast<std::size_t>(steps), SpectralField::zeros(grid));
    return out;
}

Trajectory simulate_mild(const OperatorSymbol& symbol, const SpectralField& y0, const ThickSet& E, const ControlSignal& u) {
    const auto& grid = y0.grid();
    check_same_grid(grid, E.grid(), "simulate_mild");
    if (u.knots.size() != u.values.size() + 1) throw ValidationError("simulate_mild: knots must number segments + 1");
    for (std::size_t k = 0; k + 1 < u.knots.size(); ++k)
        if (!(u.knots[k + 1] > u.knots[k])) throw ValidationError("simulate_mild: knots must increase");
    for (const auto& v : u.values) check_same_grid(v.grid(), grid, "simulate_mild");

    Trajectory traj;
    const Real t0 = u.knots.empty() ? 0.0 : u.knots.front();
    traj.times.push_back(t0);
    traj.states.push_back(y0);
    SpectralField anchor = y0;
    Real anchor_time = t0;
    for (std::size_t k = 0; k < u.values.size(); ++k) {
        const Real a = u.knots[k], b = u.knots[k + 1];
        if (u.values[k].is_zero()) {
            traj.times.push_back(b);
            traj.states.push_back(apply_propagator(symbol, anchor, b - anchor_time));
            continue;
        }
        const SpectralField start = a > anchor_time ? apply_propagator(symbol, anchor, a - anchor_time) : anchor;
        const Real dt = b - a;
        const auto step = propagator_for(symbol, grid, dt);
        const auto phi = integrated_multiplier(symbol, grid, dt);
        auto next = add(step->multiplier().apply(start.coefficients()), phi->apply(masked_coefficients(u.values[k], E)));
        anchor = SpectralField::from_coefficients(grid, std::move(next));
        anchor_time = b;
        traj.times.push_back(b);
        traj.states.push_back(anchor);
    }
    return traj;
}

Real control_cost(const ControlSignal& u, Real p, Real r) {
    Real acc = 0.0;
    for (std::size_t k = 0; k < u.values.size(); ++k) {
        const Real v = lp_norm(u.values[k], p);
        const Real dt = u.knots[k + 1] - u.knots[k];
        if (std::isinf(r))
            acc = std::max(acc, v);
        else
            acc += dt * std::pow(v, r);
    }
    return std::isinf(r) ? acc : std::pow(acc, 1.0 / r);
}

// ---------------------------------------------------------------------------
// Observability

ObservabilityEstimate observability_probe(const OperatorSymbol& symbol, const ThickSet& E, Real T, Real p, Real r,
                                          const ObservabilityOptions& options) {
    const auto& grid = E.grid();
    if (!(T > 0.0)) throw ValidationError("observability: T must be positive");
    if (!(p >= 1.0) || !(r >= 1.0)) throw ValidationError("observability: exponents must be >= 1");
    if (options.ensemble < 32) throw ValidationError("observability: ensemble must have at least 32 fields");
    if (options.min_nodes < 128) throw ValidationError("observability: at least 128 quadrature intervals are required");
    int intervals = options.min_nodes;
    if (options.node_spacing > 0.0)
        intervals = std::max(intervals, static_cast<int>(std::ceil(T / options.node_spacing - 1e-9)));

    const XNorm x = options.adjoint ? dual(grid.x_norm) : grid.x_norm;
    std::vector<SpectralField> fields;
    const std::size_t smooth = options.ensemble / 2;
    const std::vector<Real> band(static_cast<std::size_t>(grid.dim), grid.nyquist());
    for (std::size_t i = 0; i < options.ensemble; ++i)
        fields.push_back(i < smooth ? random_band_limited(grid, band, options.seed + i)
                                    : white_noise(grid, options.seed + i));

    // observed[i][j] = ||1_E V_{t_j} f_i||
    std::vector<std::vector<Real>> observed(fields.size(), std::vector<Real>(static_cast<std::size_t>(intervals) + 1));
    std::vector<Real> terminal(fields.size());
    for (int j = 0; j <= intervals; ++j) {
        const Real t = j == intervals ? T : T * j / intervals;
        const Propagator V(symbol, grid, t);
        parallel_for(fields.size(), [&](std::size_t i) {
            const auto moved = options.adjoint ? V.apply_transpose(fields[i]) : V.apply(fields[i]);
            observed[i][static_cast<std::size_t>(j)] = norm_with(grid, moved.values(), p, x, E.indicator());
            if (j == intervals) terminal[i] = norm_with(grid, moved.values(), p, x);
        });
    }

    ObservabilityEstimate est;
    est.ensemble = fields.size();
    est.intervals = intervals;
    est.p = p;
    est.r = r;
    const Real h = T / intervals;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        Real obs = 0.0;
        if (std::isinf(r)) {
            obs = *std::max_element(observed[i].begin(), observed[i].end());
        } else {
            for (int j = 0; j <= intervals; ++j) {
                const Real w = (j == 0 || j == intervals) ? 0.5 * h : h;
                obs += w * std::pow(observed[i][static_cast<std::size_t>(j)], r);
            }
            obs = std::pow(obs, 1.0 / r);
        }
        ObservabilitySample s{terminal[i], obs, 0.0};
        if (obs > 0.0) {
            s.ratio = terminal[i] / obs;
        } else {
            s.ratio = terminal[i] > 0.0 ? kInf : 0.0;
            if (terminal[i] > 0.0) est.bounded = false;
        }
        est.C_obs_hat = std::max(est.C_obs_hat, s.ratio);
        est.samples.push_back(s);
    }
    return est;
}

// ---------------------------------------------------------------------------
// Schedule

namespace {

std::size_t modes_below(const GridSpec& grid, Real lambda) {
    std::size_t count = 0;
    for (std::size_t k = 0; k < grid.cells(); ++k) {
        Real s = 0.0;
        for (Real v : grid.frequency(k)) s += v * v;
        if (std::sqrt(s) < lambda) ++count;
    }
    return count;
}

}  // namespace

ScheduleLimits schedule_limits(const GridSpec& grid, const ThickSet& E) {
    ScheduleLimits limits;
    limits.nyquist = grid.nyquist();
    limits.observed_cells = E.count();
    return limits;
}

std::vector<StageSpec> lr_schedule(Real T, Real lambda0, const GridSpec& grid, const ScheduleLimits& limits) {
    if (!(T > 0.0)) throw ValidationError("lr_schedule: T must be positive");
    if (!(lambda0 > 0.0)) throw ValidationError("lr_schedule: lambda0 must be positive");
    if (!(lambda0 < limits.nyquist)) throw ValidationError("lr_schedule: lambda0 is at or above the Nyquist band");
    std::vector<Real> lambdas{lambda0};
    for (Real l = 2.0 * lambda0; l < limits.nyquist; l *= 2.0) {
        if (static_cast<Real>(modes_below(grid, l)) > limits.fill * static_cast<Real>(limits.observed_cells)) break;
        lambdas.push_back(l);
    }
    Real weight_sum = 0.0;
    for (std::size_t j = 0; j < lambdas.size(); ++j) weight_sum += std::ldexp(1.0, -static_cast<int>(j));
    std::vector<StageSpec> stages;
    Real start = 0.0;
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
        const Real tau = T * std::ldexp(1.0, -static_cast<int>(j)) / (2.0 * weight_sum);
        StageSpec s{lambdas[j], start, tau, tau};
        if (j + 1 == lambdas.size()) s.passive = T - start - tau;
        stages.push_back(s);
        start += 2.0 * tau;
    }
    return stages;
}

// ---------------------------------------------------------------------------
// One Lebeau-Robbiano stage

StageResult stage_control(const OperatorSymbol& symbol, const SpectralField& y, Real lambda, Real tau, const ThickSet& E,
                          int steps, const CgOptions& cg) {
    const auto& grid = y.grid();
    check_same_grid(grid, E.grid(), "stage_control");
    if (!(tau > 0.0) || steps < 1) throw ValidationError("stage_control: need tau > 0 and steps >= 1");
    if (!(lambda > 0.0)) throw ValidationError("stage_control: lambda must be positive");
    const auto n = static_cast<std::size_t>(grid.value_dim);
    const std::size_t size = grid.samples();
    const Real dt = tau / steps;

    const auto step = propagator_for(symbol, grid, dt);
    const auto phi = integrated_multiplier(symbol, grid, dt);
    const auto full = propagator_for(symbol, grid, tau);

    std::vector<std::uint8_t> low(size, 0);
    for (std::size_t k = 0; k < grid.cells(); ++k) {
        Real s = 0.0;
        for (Real v : grid.frequency(k)) s += v * v;
        if (std::sqrt(s) < lambda)
            for (std::size_t j = 0; j < n; ++j) low[k * n + j] = 1;
    }
    auto project = [&](std::vector<Complex>& c) {
        for (std::size_t i = 0; i < size; ++i)
            if (!low[i]) c[i] = 0.0;
    };

    const Real y_norm = coefficient_l2(y.coefficients());
    StageResult result{{}, y, 0, 0.0, 0.0, 0.0};
    if (y_norm == 0.0) {
        result.controls.assign(static_cast<std::size_t>(steps), SpectralField::zeros(grid));
        result.end_state = apply_propagator(symbol, y, tau);
        return result;
    }

    // M_k = V_{tau - (k+1) dt} Phi_dt, the map from the k-th constant piece to y(tau).
    std::vector<FrequencyMultiplier> M(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) {
        const auto tail = propagator_for(symbol, grid, tau - (k + 1) * dt);
        auto& mk = M[static_cast<std::size_t>(k)];
        mk.grid = grid;
        mk.blocks.resize(grid.cells());
        for (std::size_t i = 0; i < grid.cells(); ++i) mk.blocks[i] = tail->at(i) * phi->blocks[i];
    }
    auto control_values = [&](const FrequencyMultiplier& mk, std::span<const Complex> z) {
        auto v = inverse_transform(grid, mk.apply_hilbert_adjoint(z));
        const auto mask = E.indicator();
        for (std::size_t c = 0; c < grid.cells(); ++c)
            for (std::size_t j = 0; j < n; ++j) v[c * n + j] = mask[c] ? v[c * n + j] / dt : Complex(0.0);
        return v;
    };
    auto gramian = [&](std::span<const Complex> z) {
        std::vector<std::vector<Complex>> parts(M.size());
        parallel_for(M.size(), [&](std::size_t k) {
            const auto v = control_values(M[k], z);
            parts[k] = M[k].apply(forward_transform(grid, v));
        });
        std::vector<Complex> acc(size, 0.0);
        for (const auto& part : parts)
            for (std::size_t i = 0; i < size; ++i) acc[i] += part[i];
        project(acc);
        for (std::size_t i = 0; i < size; ++i) acc[i] += cg.shift * z[i];
        return acc;
    };

    std::vector<Complex> b = full->multiplier().apply(y.coefficients());
    project(b);
    for (auto& v : b) v = -v;
    const Real b_norm = coefficient_l2(b);

    std::vector<Complex> z(size, 0.0);
    if (b_norm > 0.0) {
        std::vector<Complex> res = b, dir = b;
        Real rs = dot(res, res).real();
        Real anchor = std::sqrt(rs);
        int anchor_it = 0;
        int it = 0;
        while (std::sqrt(rs) > cg.tolerance * b_norm) {
            if (it >= cg.max_iterations)
                throw StageFailure("stage_control: CG iteration limit reached at lambda = " + std::to_string(lambda));
            const auto Ad = gramian(dir);
            const Real curvature = dot(dir, Ad).real();
            if (!(curvature > 0.0)) throw StageFailure("stage_control: Gramian lost positivity");
            const Real alpha = rs / curvature;
            for (std::size_t i = 0; i < size; ++i) {
                z[i] += alpha * dir[i];
                res[i] -= alpha * Ad[i];
            }
            const Real rs_new = dot(res, res).real();
            for (std::size_t i = 0; i < size; ++i) dir[i] = res[i] + (rs_new / rs) * dir[i];
            rs = rs_new;
            ++it;
            if (std::sqrt(rs) < 0.1 * anchor) {
                anchor = std::sqrt(rs);
                anchor_it = it;
            } else if (it - anchor_it >= cg.stagnation_window) {
                std::ostringstream msg;
                msg << "stage_control: CG stagnated at lambda = " << lambda << " (relative residual "
                    << std::sqrt(rs) / b_norm << " after " << it
                    << " iterations); the band is effectively unobservable from E";
                throw StageFailure(msg.str());
            }
        }
        result.cg_iterations = it;
        result.cg_residual = std::sqrt(rs) / b_norm;
    }

    // Apply the control through the same stepping as simulate_mild.
    std::vector<Complex> state(y.coefficients().begin(), y.coefficients().end());
    for (int k = 0; k < steps; ++k) {
        auto u = SpectralField::from_values(grid, control_values(M[static_cast<std::size_t>(k)], z));
        result.gramian_energy += dt * std::pow(lp_norm(u, 2.0), 2);
        state = add(step->multiplier().apply(state), phi->apply(forward_transform(grid, u.values())));
        result.controls.push_back(std::move(u));
    }
    auto low_part = state;
    project(low_part);
    result.residual = coefficient_l2(low_part) / y_norm;
    result.end_state = SpectralField::from_coefficients(grid, std::move(state));
    if (!(result.residual <= 1e-8)) {
        std::ostringstream msg;
        msg << "stage_control: low-frequency residual " << result.residual << " exceeds 1e-8 at lambda = " << lambda;
        throw StageFailure(msg.str());
    }
    return result;
}

// ---------------------------------------------------------------------------
// Synthesis

ControlOutcome synthesize_control(const ControlProblem& problem) {
    const auto& grid = problem.y0.grid();
    check_same_grid(grid, problem.E.grid(), "synthesize_control");
    if (problem.symbol.dim() != grid.dim || problem.symbol.value_dim() != grid.value_dim)
        throw ValidationError("synthesize_control: symbol and grid dimensions differ");
    if (!(problem.T > 0.0)) throw ValidationError("synthesize_control: T must be positive");
    if (!(problem.eps_target > 0.0)) throw ValidationError("synthesize_control: eps_target must be positive");
    if (!(problem.r >= 1.0)) throw ValidationError("synthesize_control: r must be >= 1");
    if (problem.time_steps < 1) throw ValidationError("synthesize_control: time_steps must be >= 1");
    const Real p = grid.lp_exponent;
    if (std::isinf(p)) throw ValidationError("synthesize_control: the state exponent p must be finite");

    ControlOutcome out;
    out.approximate = p == 1.0;
    out.initial_norm = lp_norm(problem.y0, p);
    out.u.knots.push_back(0.0);

    if (problem.y0.is_zero()) {
        out.u.knots.push_back(problem.T);
        out.u.values.push_back(SpectralField::zeros(grid));
    } else {
        const auto stages = lr_schedule(problem.T, problem.lambda0, grid, schedule_limits(grid, problem.E));
        SpectralField y = problem.y0;
        for (std::size_t j = 0; j < stages.size(); ++j) {
            const auto& s = stages[j];
            auto res = stage_control(problem.symbol, y, s.lambda, s.active, problem.E, problem.time_steps, problem.cg);
            for (int k = 0; k < problem.time_steps; ++k) {
                out.u.knots.push_back(k + 1 == problem.time_steps ? s.start + s.active
                                                                  : s.start + s.active * (k + 1) / problem.time_steps);
                out.u.values.push_back(std::move(res.controls[static_cast<std::size_t>(k)]));
            }
            const Real end = j + 1 == stages.size() ? problem.T : s.start + s.active + s.passive;
            out.u.knots.push_back(end);
            out.u.values.push_back(SpectralField::zeros(grid));
            y = apply_propagator(problem.symbol, res.end_state, end - (s.start + s.active));
            out.stages.push_back({s.lambda, s.start, s.active, end - (s.start + s.active), res.cg_iterations, res.residual});
        }
    }

    const auto traj = simulate_mild(problem.symbol, problem.y0, problem.E, out.u);
    out.terminal_norm = lp_norm(traj.states.back(), p);
    out.relative = out.initial_norm > 0.0 ? out.terminal_norm / out.initial_norm : 0.0;
    const auto fine = simulate_mild(problem.symbol, problem.y0, problem.E, out.u.refined(2));
    out.refined_relative = out.initial_norm > 0.0 ? lp_norm(fine.states.back(), p) / out.initial_norm : 0.0;
    out.success = out.relative <= problem.eps_target && out.refined_relative <= 2.0 * problem.eps_target;
    out.cost = control_cost(out.u, p, problem.r);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const Real un = k < out.u.values.size() ? lp_norm(out.u.values[k], p) : 0.0;
        out.trajectory.push_back({traj.times[k], lp_norm(traj.states[k], p), un});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Duality

DualityReport duality_check(const OperatorSymbol& symbol, const ThickSet& E, Real T, Real r,
                            const ObservabilityOptions& options, const ControlOutcome* outcome) {
    DualityReport rep;
    rep.p = E.grid().lp_exponent;
    rep.r = r;
    rep.q = holder_conjugate(rep.p);
    rep.s = holder_conjugate(r);
    auto fwd = options;
    fwd.adjoint = false;
    rep.forward = observability_probe(symbol, E, T, rep.p, rep.r, fwd);
    auto adj = options;
    adj.adjoint = true;
    rep.adjoint = observability_probe(symbol, E, T, rep.q, rep.s, adj);
    rep.ensemble_bound_holds = rep.adjoint.bounded;
    for (const auto& s : rep.adjoint.samples)
        rep.ensemble_bound_holds = rep.ensemble_bound_holds && s.terminal <= rep.adjoint.C_obs_hat * s.observed * (1.0 + 1e-12);
    if (outcome) {
        rep.control_cost = outcome->cost;
        rep.cost_bound = rep.adjoint.C_obs_hat * outcome->initial_norm * 1.1;
        rep.cost_bound_holds = *rep.control_cost <= *rep.cost_bound;
    }
    return rep;
}

}  // namespace spectracontrol
