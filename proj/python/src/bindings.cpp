#include "spectracontrol/io.hpp"
#include "spectracontrol/lr_control.hpp"
#include "spectracontrol/ls_inequality.hpp"
#include "spectracontrol/propagator.hpp"

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace spectracontrol;

namespace {

using CArray = py::array_t<Complex, py::array::c_style | py::array::forcecast>;

// Field samples as an array of shape (N,)*d + (n,), the native row-major layout.
std::vector<py::ssize_t> field_shape(const GridSpec& g) {
    std::vector<py::ssize_t> shape(static_cast<std::size_t>(g.dim), g.points);
    shape.push_back(g.value_dim);
    return shape;
}

CArray to_array(const GridSpec& g, std::span<const Complex> data) {
    CArray out(field_shape(g));
    std::copy(data.begin(), data.end(), out.mutable_data());
    return out;
}

std::vector<Complex> from_array(const GridSpec& g, const CArray& a) {
    if (static_cast<std::size_t>(a.size()) != g.samples())
        throw ValidationError("array has " + std::to_string(a.size()) + " entries, grid expects " +
                              std::to_string(g.samples()));
    return {a.data(), a.data() + a.size()};
}

CMatrix to_matrix(const py::array_t<Complex, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ValidationError("matrix must be two-dimensional");
    CMatrix m(a.shape(0), a.shape(1));
    for (py::ssize_t i = 0; i < a.shape(0); ++i)
        for (py::ssize_t j = 0; j < a.shape(1); ++j) m(i, j) = a.at(i, j);
    return m;
}

py::array_t<Complex> from_matrix(const CMatrix& m) {
    py::array_t<Complex> out({m.rows(), m.cols()});
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out.mutable_at(i, j) = m(i, j);
    return out;
}

GridSpec make_grid(int dim, int points, Real period, int value_dim, const std::string& q, Real p) {
    GridSpec g;
    g.dim = dim;
    g.points = points;
    g.period = period;
    g.value_dim = value_dim;
    g.x_norm = parse_xnorm(q);
    g.lp_exponent = p;
    g.validate();
    return g;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Spectral inequalities, normally elliptic symbols and null control on periodic grids";

    auto validation = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<SchemaError>(m, "SchemaError", validation.ptr());
    auto numerical = py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_RuntimeError);
    py::register_exception<StageFailure>(m, "StageFailure", numerical.ptr());

    py::class_<GridSpec>(m, "GridSpec")
        .def(py::init(&make_grid), py::arg("dim") = 1, py::arg("points") = 64, py::arg("period") = 2.0 * kPi,
             py::arg("value_dim") = 1, py::arg("q") = "2", py::arg("p") = 2.0)
        .def_static("parse", &parse_grid)
        .def_readonly("dim", &GridSpec::dim)
        .def_readonly("points", &GridSpec::points)
        .def_readonly("period", &GridSpec::period)
        .def_readonly("value_dim", &GridSpec::value_dim)
        .def_readonly("p", &GridSpec::lp_exponent)
        .def_property_readonly("q", [](const GridSpec& g) { return to_string(g.x_norm); })
        .def_property_readonly("cells", &GridSpec::cells)
        .def_property_readonly("cell_width", &GridSpec::cell_width)
        .def_property_readonly("nyquist", &GridSpec::nyquist)
        .def("__eq__", [](const GridSpec& a, const GridSpec& b) { return a == b; })
        .def("__repr__", [](const GridSpec& g) { return "GridSpec(" + grid_to_json(g).dump() + ")"; });

    py::class_<SpectralField>(m, "SpectralField")
        .def_static("from_values",
                    [](const GridSpec& g, const CArray& a) { return SpectralField::from_values(g, from_array(g, a)); })
        .def_static("from_coefficients",
                    [](const GridSpec& g, const CArray& a) {
                        return SpectralField::from_coefficients(g, from_array(g, a));
                    })
        .def_property_readonly("grid", &SpectralField::grid)
        .def_property_readonly("values", [](const SpectralField& f) { return to_array(f.grid(), f.values()); })
        .def_property_readonly("coefficients",
                               [](const SpectralField& f) { return to_array(f.grid(), f.coefficients()); })
        .def_property_readonly("band", &SpectralField::band)
        .def("with_band", &SpectralField::with_band)
        .def("masked", [](const SpectralField& f, const ThickSet& E) { return f.masked(E.indicator()); });

    m.def("white_noise", &white_noise, py::arg("grid"), py::arg("seed"));
    m.def(
        "random_band_limited",
        [](const GridSpec& g, const std::vector<Real>& band, std::uint64_t seed) { return random_band_limited(g, band, seed); },
        py::arg("grid"), py::arg("band"), py::arg("seed"));
    m.def("band_limit", [](const SpectralField& f, const std::vector<Real>& band) { return band_limit(f, band); });
    m.def("lp_norm", py::overload_cast<const SpectralField&, Real>(&lp_norm), py::arg("field"), py::arg("p"));
    m.def("spectral_derivative", &spectral_derivative);

    py::class_<OperatorSymbol>(m, "OperatorSymbol")
        .def(py::init([](int order, int dim, int value_dim, const std::vector<std::pair<MultiIndex, CArray>>& terms) {
                 std::vector<SymbolTerm> ts;
                 for (const auto& [alpha, a] : terms) ts.push_back({alpha, to_matrix(a)});
                 return OperatorSymbol(order, dim, value_dim, std::move(ts));
             }),
             py::arg("order"), py::arg("dim"), py::arg("value_dim"), py::arg("terms"))
        .def_static("heat", &OperatorSymbol::heat, py::arg("dim") = 1, py::arg("value_dim") = 1)
        .def_static("polyharmonic", &OperatorSymbol::polyharmonic, py::arg("dim"), py::arg("k"),
                    py::arg("value_dim") = 1)
        .def_static("from_json", [](const std::string& text) { return symbol_from_json(Json::parse(text)); })
        .def("to_json", [](const OperatorSymbol& s) { return symbol_to_json(s).dump(); })
        .def_property_readonly("order", &OperatorSymbol::order)
        .def_property_readonly("dim", &OperatorSymbol::dim)
        .def_property_readonly("value_dim", &OperatorSymbol::value_dim)
        .def("principal", &OperatorSymbol::principal)
        .def("__call__", [](const OperatorSymbol& s, const std::vector<Real>& xi) { return from_matrix(s.evaluate(xi)); });

    m.def(
        "check_normal_ellipticity",
        [](const OperatorSymbol& s, const std::string& q) {
            EllipticityOptions opt;
            opt.q = parse_xnorm(q);
            const auto r = check_normal_ellipticity(s, opt);
            py::dict out;
            out["pass"] = r.pass;
            out["kappa"] = r.kappa;
            if (r.sector) out["sector"] = py::make_tuple(r.sector->M, r.sector->phi, r.sector->mu);
            if (r.perturbation) out["perturbation"] = py::make_tuple(r.perturbation->gamma, r.perturbation->omega);
            if (r.witness) out["witness"] = r.witness->reason;
            return out;
        },
        py::arg("symbol"), py::arg("q") = "2");
    m.def("derived_sector", [](Real kappa) {
        const auto s = derived_sector(kappa);
        return py::make_tuple(s.M, s.phi, s.mu);
    });

    py::class_<ThickSet>(m, "ThickSet")
        .def(py::init([](const GridSpec& g, const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
                 if (static_cast<std::size_t>(a.size()) != g.cells()) throw ValidationError("indicator size does not match grid");
                 return ThickSet(g, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
             }),
             py::arg("grid"), py::arg("indicator"))
        .def("certified", [](const ThickSet& E, const std::vector<Real>& L) { return E.certified(L); })
        .def_property_readonly("grid", &ThickSet::grid)
        .def_property_readonly("density", &ThickSet::density)
        .def_property_readonly("rho",
                               [](const ThickSet& E) -> std::optional<Real> {
                                   if (!E.certificate()) return std::nullopt;
                                   return E.certificate()->rho;
                               })
        .def_property_readonly("indicator", [](const ThickSet& E) {
            std::vector<py::ssize_t> shape(static_cast<std::size_t>(E.grid().dim), E.grid().points);
            py::array_t<std::uint8_t> out(shape);
            std::copy(E.indicator().begin(), E.indicator().end(), out.mutable_data());
            return out;
        });
    m.def("make_stripes", &make_stripes, py::arg("grid"), py::arg("on_width"), py::arg("period"), py::arg("axis") = 0);
    m.def(
        "make_random_thick",
        [](const GridSpec& g, Real rho, const std::vector<Real>& L, std::uint64_t seed) {
            return make_random_thick(g, rho, L, seed);
        },
        py::arg("grid"), py::arg("rho"), py::arg("L"), py::arg("seed") = 0);
    m.def("verify_thickness",
          [](const ThickSet& E, const std::vector<Real>& L) { return verify_thickness(E, L); });

    m.def("ls_ratio", [](const SpectralField& f, const ThickSet& E) { return ls_ratio(f, E).ratio; });
    m.def("compute_C2", &compute_C2, py::arg("dim") = 1, py::arg("resolution") = 1);
    m.def("bernstein_check", [](const SpectralField& f, const MultiIndex& alpha) {
        const auto b = bernstein_check(f, alpha);
        py::dict out;
        out["lhs"] = b.lhs;
        out["rhs"] = b.rhs;
        out["holds"] = b.holds;
        out["sharp_rhs"] = b.sharp_rhs;
        out["slack"] = b.slack;
        return out;
    });

    m.def("apply_propagator", &apply_propagator, py::arg("symbol"), py::arg("field"), py::arg("t"));
    m.def("adjoint_propagator", &adjoint_propagator, py::arg("symbol"), py::arg("field"), py::arg("t"));
    m.def("bilinear_pairing", &bilinear_pairing);
    m.def(
        "apply_cutoff",
        [](const SpectralField& f, Real lambda, bool complement) { return apply_cutoff(f, CutoffSpec{lambda}, complement); },
        py::arg("field"), py::arg("lam"), py::arg("complement") = false);
    m.def(
        "dissipation_probe",
        [](const OperatorSymbol& s, const GridSpec& g, const std::vector<Real>& lambdas, const std::vector<Real>& ts,
           std::size_t ensemble, std::uint64_t seed) {
            DissipationOptions opt;
            opt.ensemble = ensemble;
            opt.seed = seed;
            const auto d = dissipation_probe(s, g, lambdas, ts, opt);
            py::dict out;
            out["c1"] = d.c1;
            out["c2"] = d.c2;
            out["lambda0"] = d.lambda0;
            out["fit_found"] = d.fit_found;
            py::list rows;
            for (const auto& r : d.rows) rows.append(py::make_tuple(r.t, r.lambda, r.estimate, r.exact));
            out["rows"] = rows;
            return out;
        },
        py::arg("symbol"), py::arg("grid"), py::arg("lambdas"), py::arg("ts"), py::arg("ensemble") = 64,
        py::arg("seed") = 0);

    m.def(
        "synthesize_control",
        [](const OperatorSymbol& s, const SpectralField& y0, const ThickSet& E, Real T, Real r, Real eps,
           int time_steps, Real lambda0) {
            ControlProblem pr{s, y0, E};
            pr.T = T;
            pr.r = r;
            pr.eps_target = eps;
            pr.time_steps = time_steps;
            pr.lambda0 = lambda0;
            ControlOutcome o;
            {
                py::gil_scoped_release release;
                o = synthesize_control(pr);
            }
            py::dict out;
            out["success"] = o.success;
            out["relative"] = o.relative;
            out["refined_relative"] = o.refined_relative;
            out["cost"] = o.cost;
            out["stages"] = o.stages.size();
            out["knots"] = o.u.knots;
            out["controls"] = o.u.values;
            return out;
        },
        py::arg("symbol"), py::arg("y0"), py::arg("E"), py::arg("T") = 1.0, py::arg("r") = 2.0,
        py::arg("eps_target") = 1e-6, py::arg("time_steps") = 32, py::arg("lambda0") = 4.0);

    m.def(
        "observability_probe",
        [](const OperatorSymbol& s, const ThickSet& E, Real T, Real r, std::size_t ensemble, std::uint64_t seed,
           bool adjoint) {
            ObservabilityOptions opt;
            opt.ensemble = ensemble;
            opt.seed = seed;
            opt.adjoint = adjoint;
            const auto e = observability_probe(s, E, T, E.grid().lp_exponent, r, opt);
            return py::make_tuple(e.C_obs_hat, e.bounded);
        },
        py::arg("symbol"), py::arg("E"), py::arg("T"), py::arg("r") = 2.0, py::arg("ensemble") = 32,
        py::arg("seed") = 0, py::arg("adjoint") = false);
}
