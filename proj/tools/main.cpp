// Batch driver: one subcommand per probe, JSON summary + tidy CSV per run.

#include "cli_support.hpp"

#include "spectracontrol/elliptic_symbols.hpp"
#include "spectracontrol/io.hpp"
#include "spectracontrol/lr_control.hpp"
#include "spectracontrol/ls_inequality.hpp"
#include "spectracontrol/propagator.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace spectracontrol;
using namespace spectracontrol::cli;
namespace fs = std::filesystem;

namespace {

/// Every option of every subcommand; only the selected leaf's fields are read.
struct Params {
    std::string out, csv, grid = "1:128:16:1", q = "2", p = "2";
    std::uint64_t seed = 0;

    std::string set = "stripes:1:2", symbol = "heat", lambda = "4", L, family = "stripes";
    std::string set_out, alpha = "1", t_grid = "0,0.25,0.5,1,2", xi_grid = "0,0.5,1,2,4,8",
                lambda_grid = "4,8,16", intervals_A = "0:0.25,0.5:0.75", interval_I = "0:1",
                problem, snapshots;
    Real rho = 0.5, on_width = 1.0, stripe_period = 2.0, K = kFrozenLsConstant, A = 2.0, kappa = std::sqrt(2.0),
         T = 1.0, r = 2.0, eps = 0.5, node_spacing = 0.0, eps_target = 1e-6, lambda0 = 4.0, t = 1.0;
    int axis = 0, ensemble = 100, alpha_max = 3, degree = 6, n = 1, dim = 1, sphere_samples = 0,
        lambda_samples = 400, power_iterations = 64, min_nodes = 128, time_steps = 32;
    bool adjoint = false;
};

GridSpec make_grid(const Params& p) {
    auto g = parse_grid(p.grid);
    g.x_norm = parse_xnorm(p.q);
    g.lp_exponent = parse_list(p.p, "p").at(0);
    g.validate();
    return g;
}

std::vector<Real> lambda_of(const Params& p, const GridSpec& g) {
    auto lam = per_axis(parse_list(p.lambda, "lambda"), g.dim, "lambda");
    check_resolvable(g, lam);
    return lam;
}

Json reals(std::span<const Real> v) {
    Json a = Json::array();
    for (const Real x : v) a.push_back(json_real(x));
    return a;
}

Json certificate_json(const ThickSet& E) {
    if (!E.certificate()) return nullptr;
    return Json{{"rho", E.certificate()->rho}, {"L", reals(E.certificate()->L)}};
}

// ---------------------------------------------------------------------------

Report grid_info(const Params& p) {
    Report rep("grid-info");
    const auto g = make_grid(p);
    rep.results = Json{{"grid", grid_to_json(g)}, {"cells", g.cells()},          {"samples", g.samples()},
                       {"cell_width", g.cell_width()}, {"cell_measure", g.cell_measure()}, {"volume", g.volume()},
                       {"nyquist", g.nyquist()}};
    return rep;
}

Report thick_gen(const Params& p) {
    Report rep("thick gen");
    const auto g = make_grid(p);
    std::optional<ThickSet> E;
    if (p.family == "stripes") {
        E = make_stripes(g, p.on_width, p.stripe_period, p.axis);
    } else if (p.family == "random") {
        const auto L = per_axis(parse_list(p.L.empty() ? "2" : p.L, "L"), g.dim, "L");
        E = make_random_thick(g, p.rho, L, p.seed);
    } else {
        throw ValidationError("family: expected 'stripes' or 'random'");
    }
    rep.results = Json{{"count", E->count()}, {"density", E->density()}, {"certificate", certificate_json(*E)}};
    if (!p.set_out.empty()) write_json(p.set_out, thick_set_to_json(*E));
    rep.check("certified_rho_positive", 0.0, E->certificate()->rho, nullptr, E->certificate()->rho > 0.0);
    return rep;
}

Report thick_verify(const Params& p) {
    Report rep("thick verify");
    auto doc = read_json(p.set);
    const Json stored = doc.contains("certificate") ? doc.at("certificate") : Json(nullptr);
    doc["certificate"] = nullptr;
    const auto raw = thick_set_from_json(doc);
    std::vector<Real> L;
    if (!p.L.empty()) {
        L = per_axis(parse_list(p.L, "L"), raw.grid().dim, "L");
    } else if (stored.is_object() && stored.contains("L")) {
        for (const auto& v : stored.at("L")) L.push_back(real_from_json(v, "certificate.L"));
    } else {
        throw ValidationError("L: no certificate stored; pass --L");
    }
    const Real verified = verify_thickness(raw, L);
    rep.results = Json{{"count", raw.count()}, {"density", raw.density()}, {"L", reals(L)}, {"verified_rho", verified}};
    if (stored.is_object()) {
        const Real claimed = real_from_json(stored.at("rho"), "certificate.rho");
        rep.results["certified_rho"] = claimed;
        rep.check("certified_rho <= verified_rho", claimed, verified, Json{{"L", reals(L)}},
                  claimed <= verified * (1.0 + 1e-12));
    }
    rep.check("thick", 0.0, verified, Json{{"L", reals(L)}}, verified > 0.0);
    return rep;
}

Report ls_probe(const Params& p) {
    Report rep("ls probe");
    const auto g = make_grid(p);
    const auto lam = lambda_of(p, g);
    const auto E = load_set(p.set, g);
    if (!E.certificate()) throw ValidationError("set: must be certified for ls probe");
    const auto ens = ls_probe_ensemble(g, E, lam, p.ensemble, p.seed);
    rep.table.columns = {{"sample", "ensemble index"},
                         {"seed", "field seed"},
                         {"ratio", "||1_E f||_p / ||f||_p"},
                         {"bound", "(rho/K)^(K (d + L.lambda)) at the configured K"},
                         {"fitted_K", "smallest K valid for this sample"}};
    for (std::size_t i = 0; i < ens.samples.size(); ++i) {
        const auto& s = ens.samples[i];
        const Real bound = s.bound(p.K);
        rep.table.add({static_cast<long long>(i), static_cast<long long>(p.seed + i), s.ratio, bound, s.fitted_K});
        rep.check("ls_bound[" + std::to_string(i) + "]", bound, s.ratio, Json{{"seed", p.seed + i}});
    }
    rep.results = Json{{"rho", E.certificate()->rho},
                       {"L", reals(E.certificate()->L)},
                       {"lambda", reals(lam)},
                       {"K", p.K},
                       {"min_ratio", ens.min_ratio},
                       {"fitted_K", ens.fitted_K},
                       {"density_root", std::pow(E.density(), 1.0 / g.lp_exponent)}};
    return rep;
}

Report ls_cubes(const Params& p) {
    Report rep("ls cubes");
    const auto g = make_grid(p);
    const auto lam = lambda_of(p, g);
    rep.table.columns = {{"sample", "ensemble index"},       {"cubes", "unit cubes"},
                         {"good", "good cubes"},             {"good_norm", "||1_good f||_p"},
                         {"total_norm", "||f||_p"},          {"C3", "good-mass constant"},
                         {"tail_bound", "untested-order mass bound"}};
    Real C3 = 0.0;
    for (int i = 0; i < p.ensemble; ++i) {
        const auto f = random_band_limited(g, lam, p.seed + static_cast<std::uint64_t>(i));
        const auto rpt = classify_cubes(f, p.A, p.alpha_max);
        C3 = rpt.C3;
        rep.table.add({static_cast<long long>(i), static_cast<long long>(rpt.cubes.size()),
                       static_cast<long long>(rpt.good_count()), rpt.good_norm, rpt.total_norm, rpt.C3, rpt.tail_bound});
        rep.check("good_mass[" + std::to_string(i) + "]", rpt.C3 * rpt.total_norm, rpt.good_norm,
                  Json{{"seed", p.seed + static_cast<std::uint64_t>(i)}});
    }
    rep.results = Json{{"A", p.A}, {"A_floor", cube_constant_floor(g.dim)}, {"C2", compute_C2(g.dim)}, {"C3", C3}};
    return rep;
}

Report ls_bernstein(const Params& p) {
    Report rep("ls bernstein");
    const auto g = make_grid(p);
    const auto lam = lambda_of(p, g);
    const auto ints = parse_ints(p.alpha, "alpha");
    MultiIndex alpha(ints.begin(), ints.end());
    if (alpha.size() == 1 && g.dim > 1) alpha.resize(static_cast<std::size_t>(g.dim), 0);
    rep.table.columns = {{"sample", "ensemble index"},
                         {"lhs", "||d^alpha f||_p"},
                         {"rhs", "C2^|alpha| lambda^alpha ||f||_p"},
                         {"sharp_rhs", "(lambda/2)^alpha ||f||_2 (p = 2 only, else empty)"},
                         {"slack", "relative slack of the sharpest bound"}};
    for (int i = 0; i < p.ensemble; ++i) {
        const auto f = random_band_limited(g, lam, p.seed + static_cast<std::uint64_t>(i));
        const auto b = bernstein_check(f, alpha);
        rep.table.add({static_cast<long long>(i), b.lhs, b.rhs, b.sharp_rhs ? TidyTable::Cell(*b.sharp_rhs) : std::string(),
                       b.slack});
        const Json ctx{{"seed", p.seed + static_cast<std::uint64_t>(i)}};
        rep.check("bernstein[" + std::to_string(i) + "]", b.lhs, b.rhs, ctx, b.holds);
        if (b.sharp_rhs) rep.check("bernstein_sharp[" + std::to_string(i) + "]", b.lhs, *b.sharp_rhs, ctx, b.sharp_holds);
    }
    rep.results = Json{{"alpha", alpha}, {"lambda", reals(lam)}, {"C2", compute_C2(g.dim)}};
    return rep;
}

std::vector<Interval> parse_intervals(const std::string& text, const char* field) {
    std::vector<Interval> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ValidationError(std::string(field) + ": intervals are written lo:hi");
        const auto v = parse_list(item.substr(0, colon) + "," + item.substr(colon + 1), field);
        out.push_back({v[0], v[1]});
    }
    return out;
}

Report ls_remez(const Params& p) {
    Report rep("ls remez");
    if (p.degree < 0 || p.n < 1) throw ValidationError("degree: must be >= 0 (and n >= 1)");
    CounterRng rng(p.seed);
    std::vector<CVector> coeffs(static_cast<std::size_t>(p.degree) + 1, CVector(p.n));
    for (auto& c : coeffs)
        for (int k = 0; k < p.n; ++k) c(k) = rng.complex_normal();
    const auto I = parse_intervals(p.interval_I, "I");
    if (I.size() != 1) throw ValidationError("I: exactly one interval expected");
    const auto res = remez_probe(coeffs, parse_xnorm(p.q), I[0], parse_intervals(p.intervals_A, "A"));
    rep.results = Json{{"M", res.M},           {"exponent", res.exponent}, {"sup_I", res.sup_I},
                       {"sup_A", res.sup_A},   {"measure_A", res.measure_A}, {"fitted_C1", res.fitted_C1}};
    rep.check("sup_A <= sup_I", res.sup_A, 1.0 + 1e-12);
    return rep;
}

EllipticityOptions ellipticity_options(const Params& p) {
    EllipticityOptions o;
    o.sphere_samples = static_cast<std::size_t>(p.sphere_samples);
    o.lambda_samples = static_cast<std::size_t>(p.lambda_samples);
    o.q = parse_xnorm(p.q);
    return o;
}

Json ellipticity_json(const EllipticityReport& r) {
    Json j{{"pass", r.pass},
           {"kappa", json_real(r.kappa)},
           {"q", to_string(r.q)},
           {"sphere_samples", r.sphere_samples},
           {"lambda_samples", r.lambda_samples},
           {"lambda_max", r.lambda_max},
           {"tail_bound", json_real(r.tail_bound)}};
    if (r.sector) j["sector"] = Json{{"M", r.sector->M}, {"phi", r.sector->phi}, {"mu", r.sector->mu}};
    if (r.perturbation)
        j["perturbation"] = Json{{"gamma", r.perturbation->gamma},
                                 {"omega", r.perturbation->omega},
                                 {"M_prime", r.perturbation->M_prime},
                                 {"worst_neumann", r.perturbation->worst_neumann},
                                 {"doublings", r.perturbation->doublings}};
    Json semi = Json::array();
    for (const auto& s : r.seminorms) semi.push_back(Json{{"alpha", s.alpha}, {"value", json_real(s.value)}});
    j["seminorms"] = semi;
    if (r.witness)
        j["witness"] = Json{{"xi", reals(r.witness->xi)},
                            {"lambda", Json::array({r.witness->lambda.real(), r.witness->lambda.imag()})},
                            {"reason", r.witness->reason}};
    return j;
}

Report symbol_check(const Params& p) {
    Report rep("symbol check");
    const auto sym = load_symbol(p.symbol, p.dim, p.n);
    const auto r = check_normal_ellipticity(sym, ellipticity_options(p));
    rep.results = ellipticity_json(r);
    rep.results["symbol"] = symbol_to_json(sym);
    Json ctx = r.witness ? rep.results["witness"] : Json(nullptr);
    rep.check("normally_elliptic", r.kappa, kInf, ctx, r.pass);
    return rep;
}

Report symbol_sector(const Params& p) {
    Report rep("symbol sector");
    if (!(p.kappa >= 1.0)) throw ValidationError("kappa: must be >= 1");
    const auto s = derived_sector(p.kappa);
    rep.results = Json{{"kappa", p.kappa}, {"M", s.M}, {"phi", s.phi}, {"mu", s.mu}};
    return rep;
}

Report prop_decay(const Params& p) {
    Report rep("prop decay");
    const auto sym = load_symbol(p.symbol, p.dim, p.n);
    const auto ell = check_normal_ellipticity(sym, ellipticity_options(p));
    if (!ell.pass) throw ValidationError("symbol: not normally elliptic; decay probe needs a passing symbol");
    const auto ints = parse_ints(p.alpha, "alpha");
    MultiIndex alpha(ints.begin(), ints.end());
    alpha.resize(static_cast<std::size_t>(p.dim), 0);
    const auto ts = parse_list(p.t_grid, "t-grid");
    std::vector<std::vector<Real>> xis;
    for (const Real s : parse_list(p.xi_grid, "xi-grid"))
        xis.emplace_back(static_cast<std::size_t>(p.dim), s / std::sqrt(static_cast<Real>(p.dim)));
    const auto probe = symbol_decay_probe(sym, ell, alpha, ts, xis);
    rep.table.columns = {{"t", "time"},
                         {"xi_norm", "|xi|"},
                         {"lhs", "||d^alpha S_t(xi)||"},
                         {"rhs", "exp(omega t - mu |xi|^m t)"},
                         {"ratio", "lhs / rhs"},
                         {"converged", "finite differences converged (1/0)"}};
    Real xn = 0.0;
    for (const auto& row : probe.rows) {
        xn = 0.0;
        for (const Real x : row.xi) xn += x * x;
        rep.table.add({row.t, std::sqrt(xn), row.lhs, row.envelope, row.ratio, static_cast<long long>(row.converged)});
    }
    rep.results = Json{{"alpha", alpha}, {"omega", probe.omega}, {"mu", probe.mu}, {"K_alpha", json_real(probe.K_alpha)}};
    rep.check("K_alpha finite", probe.K_alpha, kInf, nullptr, probe.holds);
    return rep;
}

DissipationOptions dissipation_options(const Params& p) {
    DissipationOptions o;
    o.ensemble = static_cast<std::size_t>(p.ensemble);
    o.power_iterations = p.power_iterations;
    o.seed = p.seed;
    return o;
}

Report prop_dissipation(const Params& p) {
    Report rep("prop dissipation");
    const auto g = make_grid(p);
    const auto sym = load_symbol(p.symbol, g.dim, g.value_dim);
    const auto lams = parse_list(p.lambda_grid, "lambda-grid");
    const auto ts = parse_list(p.t_grid, "t-grid");
    const auto probe = dissipation_probe(sym, g, lams, ts, dissipation_options(p));
    rep.table.columns = {{"t", "time"},
                         {"lambda", "cutoff radius"},
                         {"lhs", "ensemble estimate of ||(I - P_lambda) V_t||_{p->p}"},
                         {"rhs", "c1 exp(-c2 t lambda^m)"},
                         {"exact", "Parseval norm (p = q = 2, else empty)"}};
    for (const auto& row : probe.rows) {
        rep.table.add({row.t, row.lambda, row.estimate, row.bound, row.exact ? TidyTable::Cell(*row.exact) : std::string()});
        if (probe.fit_found && row.lambda >= probe.lambda0)
            rep.check("dissipation t=" + format_real(row.t) + " lambda=" + format_real(row.lambda), row.estimate,
                      row.bound * (1.0 + 1e-8), Json{{"t", row.t}, {"lambda", row.lambda}});
    }
    rep.results = Json{{"p", json_real(probe.p)}, {"m", probe.m},           {"c1", probe.c1}, {"c2", probe.c2},
                       {"lambda0", probe.lambda0}, {"fit_found", probe.fit_found}, {"norms", "ensemble estimates"}};
    rep.check("fit_found", 0.0, probe.c2, nullptr, probe.fit_found);
    return rep;
}

Report prop_generator(const Params& p) {
    Report rep("prop generator");
    const auto g = make_grid(p);
    const auto sym = load_symbol(p.symbol, g.dim, g.value_dim);
    const auto f = random_band_limited(g, lambda_of(p, g), p.seed);
    const auto ts = parse_list(p.t_grid, "t-grid");
    const auto chk = generator_check(sym, f, ts);
    rep.table.columns = {{"t", "time"}, {"r", "||(V_t f - f)/t + a(D) f|| / ||a(D) f||"}};
    for (const auto& row : chk.rows) rep.table.add({row.t, row.r});
    rep.results = Json{{"skipped", chk.skipped}, {"C", chk.C}, {"order", chk.order}};
    if (!chk.skipped) rep.check("order >= 0.9", 0.9, chk.order);
    return rep;
}

Report prop_multiplier(const Params& p) {
    Report rep("prop multiplier");
    const auto g = make_grid(p);
    const auto sym = load_symbol(p.symbol, g.dim, g.value_dim);
    const Real t = p.t;
    const auto ms = multiplier_seminorm(
        g, [&](std::span<const Real> xi) { return propagator_matrix(sym, xi, t); }, p.eps);
    rep.results = Json{{"t", t},         {"sobolev", ms.sobolev},     {"decay", ms.decay},
                       {"mu", ms.mu},    {"kernel_l1", ms.kernel_l1}, {"ratio", ms.ratio}};
    rep.check("kernel_l1 finite", ms.kernel_l1, kInf, nullptr, std::isfinite(ms.kernel_l1));
    return rep;
}

ObservabilityOptions observability_options(const Params& p) {
    ObservabilityOptions o;
    o.ensemble = static_cast<std::size_t>(p.ensemble);
    o.min_nodes = p.min_nodes;
    o.node_spacing = p.node_spacing;
    o.seed = p.seed;
    o.adjoint = p.adjoint;
    return o;
}

Json observability_json(const ObservabilityEstimate& e) {
    return Json{{"C_obs_hat", json_real(e.C_obs_hat)}, {"bounded", e.bounded}, {"ensemble", e.ensemble},
                {"intervals", e.intervals},            {"p", json_real(e.p)},  {"r", json_real(e.r)},
                {"quadrature", std::isinf(e.r) ? "max over nodes" : "composite trapezoid"}};
}

Report obs_probe(const Params& p) {
    Report rep("obs probe");
    const auto g = make_grid(p);
    const auto sym = load_symbol(p.symbol, g.dim, g.value_dim);
    const auto E = load_set(p.set, g);
    const auto est = observability_probe(sym, E, p.T, g.lp_exponent, p.r, observability_options(p));
    rep.table.columns = {{"sample", "ensemble index"},
                         {"terminal", "||V_T f||_p"},
                         {"observed", "||V_(.) f||_{L^r(0,T; L^p(E))}"},
                         {"ratio", "terminal / observed"}};
    for (std::size_t i = 0; i < est.samples.size(); ++i)
        rep.table.add({static_cast<long long>(i), est.samples[i].terminal, est.samples[i].observed, est.samples[i].ratio});
    rep.results = observability_json(est);
    rep.check("observed norms nonzero", est.C_obs_hat, kInf, nullptr, est.bounded);
    return rep;
}

ControlProblem load_problem(const Params& p, Json& echo) {
    if (p.problem.empty()) throw ValidationError("problem: --problem is required");
    const auto doc = read_json(p.problem);
    const auto base = fs::path(p.problem).parent_path();
    auto need = [&](const char* key) -> const Json& {
        if (!doc.contains(key)) throw SchemaError(std::string("problem: missing field '") + key + "'");
        return doc.at(key);
    };
    const auto g = grid_from_json(need("grid"));
    auto sym = load_symbol(need("symbol"), g.dim, g.value_dim, base);
    auto E = load_set(need("set"), g, base);
    auto y0 = load_field(need("y0"), g, base);
    ControlProblem pr{std::move(sym), std::move(y0), std::move(E)};
    pr.T = p.T;
    pr.r = p.r;
    pr.eps_target = p.eps_target;
    pr.time_steps = p.time_steps;
    pr.lambda0 = p.lambda0;
    echo = doc;
    return pr;
}

/// Problem scalars act as defaults; explicit flags override them.
void problem_defaults(CLI::App* leaf, const std::string& path) {
    if (path.empty()) return;
    const auto doc = read_json(path);
    for (const char* key : {"T", "r", "eps_target", "time_steps", "lambda0"}) {
        if (!doc.contains(key)) continue;
        auto* opt = leaf->get_option_no_throw(std::string("--") + key);
        if (opt != nullptr && opt->count() == 0) {
            const auto& v = doc.at(key);
            if (!v.is_number()) throw SchemaError(std::string("problem: field '") + key + "' must be a number");
            opt->add_result(v.is_number_integer() ? v.dump() : format_real(v.get<Real>()));
            opt->run_callback();
        }
    }
}

Report control_run(const Params& p) {
    Report rep("control run");
    Json echo;
    const auto pr = load_problem(p, echo);
    rep.parameters["problem_document"] = echo;
    rep.table.columns = {{"t", "time"}, {"state_norm", "||y(t)||_p"}, {"control_norm", "||u(t)||_p on [t, next knot)"}};
    ControlOutcome out;
    try {
        out = synthesize_control(pr);
    } catch (const StageFailure& e) {
        rep.fail(e.what());
        rep.check("stage postcondition", kInf, 1e-8, Json{{"error", e.what()}}, false);
        return rep;
    }
    for (const auto& row : out.trajectory) rep.table.add({row.t, row.state_norm, row.control_norm});
    Json stages = Json::array();
    for (const auto& s : out.stages)
        stages.push_back(Json{{"lambda", s.lambda},
                              {"start", s.start},
                              {"active", s.active},
                              {"passive", s.passive},
                              {"cg_iterations", s.cg_iterations},
                              {"residual", s.residual}});
    Json snaps = Json::array();
    if (!p.snapshots.empty()) {
        fs::create_directories(p.snapshots);
        for (std::size_t k = 0; k < out.u.values.size(); ++k) {
            std::ostringstream name;
            name << "u_" << std::setw(5) << std::setfill('0') << k << ".fld";
            const auto path = fs::path(p.snapshots) / name.str();
            write_field(path, out.u.values[k]);
            snaps.push_back(Json{{"t0", out.u.knots[k]}, {"t1", out.u.knots[k + 1]}, {"path", path.generic_string()}});
        }
    }
    rep.results = Json{{"initial_norm", out.initial_norm},
                       {"terminal_norm", out.terminal_norm},
                       {"relative", out.relative},
                       {"refined_relative", out.refined_relative},
                       {"cost", json_real(out.cost)},
                       {"success", out.success},
                       {"semantics", out.approximate ? "approximate" : "exact"},
                       {"stages", stages},
                       {"segments", out.u.segments()},
                       {"snapshots", snaps}};
    rep.check("terminal <= eps ||y0||", out.terminal_norm, pr.eps_target * out.initial_norm);
    rep.check("refined terminal <= 2 eps ||y0||", out.refined_relative, 2.0 * pr.eps_target);
    rep.check("cost finite", out.cost, kInf, nullptr, std::isfinite(out.cost));
    return rep;
}

Report duality_cmd(const Params& p) {
    Report rep("duality check");
    const auto g = make_grid(p);
    const auto sym = load_symbol(p.symbol, g.dim, g.value_dim);
    const auto E = load_set(p.set, g);
    std::optional<ControlOutcome> outcome;
    if (!p.problem.empty()) {
        Json echo;
        const auto pr = load_problem(p, echo);
        if (!(pr.E.grid() == g)) throw ValidationError("problem: grid differs from --grid");
        outcome = synthesize_control(pr);
    }
    const auto d = duality_check(sym, E, p.T, p.r, observability_options(p), outcome ? &*outcome : nullptr);
    rep.results = Json{{"p", json_real(d.p)},
                       {"r", json_real(d.r)},
                       {"q", json_real(d.q)},
                       {"s", json_real(d.s)},
                       {"forward", observability_json(d.forward)},
                       {"adjoint", observability_json(d.adjoint)}};
    rep.table.columns = {{"sample", "ensemble index"},
                         {"terminal", "||W_T f||_q"},
                         {"observed", "||W_(.) f||_{L^s(0,T; L^q(E))}"},
                         {"ratio", "terminal / observed"}};
    for (std::size_t i = 0; i < d.adjoint.samples.size(); ++i) {
        const auto& s = d.adjoint.samples[i];
        rep.table.add({static_cast<long long>(i), s.terminal, s.observed, s.ratio});
    }
    rep.check("adjoint observability on ensemble", 0.0, 0.0, nullptr, d.ensemble_bound_holds);
    if (d.control_cost) {
        rep.results["control_cost"] = json_real(*d.control_cost);
        rep.results["cost_bound"] = json_real(*d.cost_bound);
        rep.check("cost <= 1.1 C_obs(W) ||y0||", *d.control_cost, *d.cost_bound, nullptr, *d.cost_bound_holds);
    }
    return rep;
}

struct Leaf {
    CLI::App* app;
    std::string path;
    std::function<Report(const Params&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    Params P;
    CLI::App app{"spectracontrol: spectral inequalities, dissipation and null control on periodic grids"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config; flags override its fields");
    std::vector<Leaf> leaves;

    auto common = [&](CLI::App* a) {
        a->add_option("--out", P.out, "JSON summary path (stdout when empty)");
        a->add_option("--csv", P.csv, "tidy CSV path (column dictionary next to it)");
        a->add_option("--seed", P.seed, "64-bit seed");
    };
    auto grid_opts = [&](CLI::App* a) {
        a->add_option("--grid", P.grid, "d:N:Q:n");
        a->add_option("--q", P.q, "norm on C^n: 1, 2 or inf");
        a->add_option("--p", P.p, "L^p exponent");
    };
    auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& path, const std::string& help,
                    std::function<Report(const Params&)> run) {
        auto* a = parent->add_subcommand(name, help);
        common(a);
        leaves.push_back({a, path, std::move(run)});
        return a;
    };

    auto* gi = leaf(&app, "grid-info", "grid-info", "grid geometry and Nyquist band", grid_info);
    grid_opts(gi);

    auto* thick = app.add_subcommand("thick", "thick sets")->require_subcommand(1);
    auto* tg = leaf(thick, "gen", "thick gen", "generate and certify a thick set", thick_gen);
    grid_opts(tg);
    tg->add_option("--family", P.family, "stripes or random");
    tg->add_option("--on-width", P.on_width, "stripe width");
    tg->add_option("--stripe-period", P.stripe_period, "stripe period");
    tg->add_option("--axis", P.axis, "stripe axis");
    tg->add_option("--rho", P.rho, "target density per block (random)");
    tg->add_option("--L", P.L, "block side(s) (random)");
    tg->add_option("--set-out", P.set_out, "write the set document here");
    auto* tv = leaf(thick, "verify", "thick verify", "re-verify a stored set", thick_verify);
    tv->add_option("--set", P.set, "thick-set JSON path")->required();
    tv->add_option("--L", P.L, "box side(s); default: the stored certificate's");

    auto* ls = app.add_subcommand("ls", "spectral inequality probes")->require_subcommand(1);
    auto* lp = leaf(ls, "probe", "ls probe", "LS ratio ensemble", ls_probe);
    grid_opts(lp);
    lp->add_option("--set", P.set, "set family or JSON path");
    lp->add_option("--lambda", P.lambda, "band (one value or per axis)");
    lp->add_option("--ensemble", P.ensemble, "samples");
    lp->add_option("--K", P.K, "frozen constant K");
    auto* lc = leaf(ls, "cubes", "ls cubes", "good/bad cube classification", ls_cubes);
    grid_opts(lc);
    lc->add_option("--lambda", P.lambda, "band");
    lc->add_option("--A", P.A, "cube constant");
    lc->add_option("--alpha-max", P.alpha_max, "highest tested order");
    lc->add_option("--ensemble", P.ensemble, "samples");
    auto* lb = leaf(ls, "bernstein", "ls bernstein", "Bernstein inequality", ls_bernstein);
    grid_opts(lb);
    lb->add_option("--lambda", P.lambda, "band");
    lb->add_option("--alpha", P.alpha, "multi-index, comma separated");
    lb->add_option("--ensemble", P.ensemble, "samples");
    auto* lr = leaf(ls, "remez", "ls remez", "Remez-type lemma on a random polynomial", ls_remez);
    lr->add_option("--degree", P.degree, "polynomial degree");
    lr->add_option("--n", P.n, "value dimension");
    lr->add_option("--q", P.q, "norm on C^n");
    lr->add_option("--I", P.interval_I, "interval lo:hi");
    lr->add_option("--A", P.intervals_A, "subset lo:hi,lo:hi,...");

    auto* sym = app.add_subcommand("symbol", "symbol checks")->require_subcommand(1);
    auto symbol_opts = [&](CLI::App* a) {
        a->add_option("--symbol", P.symbol, "heat, biharmonic, transport, coupled, or JSON path");
        a->add_option("--dim", P.dim, "d for builtin symbols");
        a->add_option("--n", P.n, "n for builtin symbols");
        a->add_option("--q", P.q, "norm on C^n");
        a->add_option("--sphere-samples", P.sphere_samples, "0 selects 256 d");
        a->add_option("--lambda-samples", P.lambda_samples, "per ray");
    };
    auto* sc = leaf(sym, "check", "symbol check", "normal ellipticity", symbol_check);
    symbol_opts(sc);
    auto* ss = leaf(sym, "sector", "symbol sector", "sector derived from kappa", symbol_sector);
    ss->add_option("--kappa", P.kappa, "ellipticity constant");

    auto* prop = app.add_subcommand("prop", "propagator probes")->require_subcommand(1);
    auto* pd = leaf(prop, "decay", "prop decay", "symbol decay bound", prop_decay);
    symbol_opts(pd);
    pd->add_option("--alpha", P.alpha, "multi-index");
    pd->add_option("--t-grid", P.t_grid, "times");
    pd->add_option("--xi-grid", P.xi_grid, "|xi| values along the diagonal");
    auto* pdi = leaf(prop, "dissipation", "prop dissipation", "high-frequency dissipation", prop_dissipation);
    grid_opts(pdi);
    pdi->add_option("--symbol", P.symbol, "symbol");
    pdi->add_option("--lambda-grid", P.lambda_grid, "cutoff radii");
    pdi->add_option("--t-grid", P.t_grid, "times");
    pdi->add_option("--ensemble", P.ensemble, "random starts");
    pdi->add_option("--power-iterations", P.power_iterations, "power iterations per start");
    auto* pg = leaf(prop, "generator", "prop generator", "generator convergence", prop_generator);
    grid_opts(pg);
    pg->add_option("--symbol", P.symbol, "symbol");
    pg->add_option("--lambda", P.lambda, "band of the test field");
    pg->add_option("--t-grid", P.t_grid, "times (> 0)");
    auto* pm = leaf(prop, "multiplier", "prop multiplier", "multiplier seminorm of S_t", prop_multiplier);
    grid_opts(pm);
    pm->add_option("--symbol", P.symbol, "symbol");
    pm->add_option("--t", P.t, "time");
    pm->add_option("--eps", P.eps, "decay exponent margin");

    auto obs_opts = [&](CLI::App* a) {
        grid_opts(a);
        a->add_option("--symbol", P.symbol, "symbol");
        a->add_option("--set", P.set, "set family or JSON path");
        a->add_option("--T", P.T, "horizon");
        a->add_option("--r", P.r, "time exponent");
        a->add_option("--ensemble", P.ensemble, "fields (>= 32)");
        a->add_option("--min-nodes", P.min_nodes, "trapezoid intervals (>= 128)");
        a->add_option("--node-spacing", P.node_spacing, "fixed node spacing (0: min-nodes only)");
    };
    auto* obs = app.add_subcommand("obs", "observability")->require_subcommand(1);
    auto* op = leaf(obs, "probe", "obs probe", "observability constant estimate", obs_probe);
    obs_opts(op);
    op->add_flag("--adjoint", P.adjoint, "use W_t");

    auto control_opts = [&](CLI::App* a) {
        a->add_option("--problem", P.problem, "problem JSON");
        a->add_option("--eps-target", P.eps_target, "terminal tolerance");
        a->add_option("--time-steps", P.time_steps, "steps per active interval");
        a->add_option("--lambda0", P.lambda0, "first band");
    };
    auto* ctl = app.add_subcommand("control", "null control")->require_subcommand(1);
    auto* cr = leaf(ctl, "run", "control run", "Lebeau-Robbiano synthesis", control_run);
    control_opts(cr);
    cr->add_option("--T", P.T, "horizon");
    cr->add_option("--r", P.r, "time exponent of the cost");
    cr->add_option("--snapshots", P.snapshots, "directory for u segment fields");

    auto* dual = app.add_subcommand("duality", "duality")->require_subcommand(1);
    auto* dc = leaf(dual, "check", "duality check", "adjoint observability and cost bound", duality_cmd);
    obs_opts(dc);
    control_opts(dc);

    // Config fields are injected as flags right after the subcommand path, so later flags win.
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--config" && i + 1 < args.size()) {
                config_path = args[i + 1];
                args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
                break;
            }
            if (args[i].rfind("--config=", 0) == 0) {
                config_path = args[i].substr(9);
                args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
                break;
            }
        }
        if (!config_path.empty()) {
            std::size_t depth = 0;
            std::string path;
            for (; depth < args.size() && args[depth].rfind("-", 0) != 0; ++depth) path += (depth ? " " : "") + args[depth];
            const Leaf* target = nullptr;
            for (const auto& l : leaves)
                if (l.path == path) target = &l;
            if (target == nullptr) throw ValidationError("config: '" + path + "' is not a subcommand");
            std::vector<std::string> known;
            for (const auto* opt : target->app->get_options()) {
                const auto& names = opt->get_lnames();
                if (!names.empty()) known.push_back(names.front());
            }
            const auto tokens = config_tokens(read_json(config_path), path, known);
            args.insert(args.begin() + static_cast<std::ptrdiff_t>(depth), tokens.begin(), tokens.end());
        }
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kInvalid;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    }

    for (const auto& l : leaves) {
        if (!l.app->parsed()) continue;
        try {
            if (l.path == "control run" || l.path == "duality check") problem_defaults(l.app, P.problem);
            auto rep = l.run(P);
            for (const auto* opt : l.app->get_options()) {
                const auto& names = opt->get_lnames();
                if (names.empty() || names.front() == "help" || names.front() == "out" || names.front() == "csv")
                    continue;
                rep.parameters[names.front()] = opt->count() > 0 ? opt->as<std::string>() : opt->get_default_str();
            }
            const auto doc = rep.document();
            if (P.out.empty())
                std::cout << doc.dump(2) << '\n';
            else
                write_json(P.out, doc);
            if (!P.csv.empty()) write_csv(P.csv, rep.table);
            if (!rep.passed()) {
                std::cerr << "assertion failed: " << doc["counterexample"].dump() << '\n';
                return kAssertionFailed;
            }
            return kOk;
        } catch (const ValidationError& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kInvalid;
        } catch (const NumericalFailure& e) {
            std::cerr << "failure: " << e.what() << '\n';
            return kAssertionFailed;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kAssertionFailed;
        }
    }
    return kInvalid;
}
