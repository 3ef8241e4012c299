#include "spectracontrol/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace spectracontrol {

Json json_real(Real v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

Real real_from_json(const Json& j, const std::string& what) {
    if (j.is_number()) return j.get<Real>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "Infinity") return kInf;
        if (s == "-inf") return -kInf;
    }
    throw SchemaError(what + ": expected a number");
}

namespace {

const Json& require(const Json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw SchemaError(where + ": missing field '" + key + "'");
    return j.at(key);
}

int require_int(const Json& j, const char* key, const std::string& where) {
    const auto& v = require(j, key, where);
    if (!v.is_number_integer()) throw SchemaError(where + ": field '" + key + "' must be an integer");
    return v.get<int>();
}

Complex complex_from_json(const Json& j, const std::string& where) {
    if (j.is_number()) return {j.get<Real>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) return {j[0].get<Real>(), j[1].get<Real>()};
    throw SchemaError(where + ": matrix entries must be numbers or [re, im] pairs");
}

Json complex_to_json(Complex z) {
    if (z.imag() == 0.0) return z.real();
    return Json::array({z.real(), z.imag()});
}

void put_u32(std::array<unsigned char, 64>& h, std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) h[at + static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
}

void put_f64(std::array<unsigned char, 64>& h, std::size_t at, Real v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) h[at + static_cast<std::size_t>(i)] = static_cast<unsigned char>(bits >> (8 * i));
}

std::uint32_t get_u32(const std::array<unsigned char, 64>& h, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(h[at + static_cast<std::size_t>(i)]) << (8 * i);
    return v;
}

Real get_f64(const std::array<unsigned char, 64>& h, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(h[at + static_cast<std::size_t>(i)]) << (8 * i);
    return std::bit_cast<Real>(v);
}

}  // namespace

Json grid_to_json(const GridSpec& grid) {
    return Json{{"d", grid.dim},         {"N", grid.points}, {"Q", grid.period}, {"n", grid.value_dim},
                {"q", to_string(grid.x_norm)}, {"p", json_real(grid.lp_exponent)}};
}

GridSpec grid_from_json(const Json& j) {
    if (j.is_string()) return parse_grid(j.get<std::string>());
    const std::string where = "grid";
    GridSpec g;
    g.dim = require_int(j, "d", where);
    g.points = require_int(j, "N", where);
    g.period = real_from_json(require(j, "Q", where), "grid.Q");
    g.value_dim = j.contains("n") ? require_int(j, "n", where) : 1;
    if (j.contains("q")) {
        const auto& q = j.at("q");
        g.x_norm = parse_xnorm(q.is_string() ? q.get<std::string>() : format_real(q.get<Real>()));
    }
    if (j.contains("p")) g.lp_exponent = real_from_json(j.at("p"), "grid.p");
    g.validate();
    return g;
}

Json symbol_to_json(const OperatorSymbol& symbol) {
    Json terms = Json::array();
    for (const auto& t : symbol.terms()) {
        Json rows = Json::array();
        for (Eigen::Index i = 0; i < t.coefficient.rows(); ++i) {
            Json row = Json::array();
            for (Eigen::Index k = 0; k < t.coefficient.cols(); ++k) row.push_back(complex_to_json(t.coefficient(i, k)));
            rows.push_back(row);
        }
        terms.push_back(Json{{"alpha", t.alpha}, {"matrix", rows}});
    }
    return Json{{"m", symbol.order()}, {"d", symbol.dim()}, {"n", symbol.value_dim()}, {"terms", terms}};
}

OperatorSymbol symbol_from_json(const Json& j) {
    const std::string where = "symbol";
    const int m = require_int(j, "m", where);
    const int d = require_int(j, "d", where);
    const int n = require_int(j, "n", where);
    const auto& terms = require(j, "terms", where);
    if (!terms.is_array()) throw SchemaError("symbol: 'terms' must be an array");
    std::vector<SymbolTerm> out;
    for (const auto& t : terms) {
        const auto& alpha = require(t, "alpha", "symbol term");
        if (!alpha.is_array()) throw SchemaError("symbol term: 'alpha' must be an array");
        MultiIndex a;
        for (const auto& v : alpha) {
            if (!v.is_number_integer()) throw SchemaError("symbol term: alpha entries must be integers");
            a.push_back(v.get<int>());
        }
        const auto& rows = require(t, "matrix", "symbol term");
        if (!rows.is_array() || static_cast<int>(rows.size()) != n)
            throw SchemaError("symbol term: 'matrix' must have n rows");
        CMatrix c(n, n);
        for (int i = 0; i < n; ++i) {
            const auto& row = rows[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<int>(row.size()) != n)
                throw SchemaError("symbol term: every matrix row must have n entries");
            for (int k = 0; k < n; ++k) c(i, k) = complex_from_json(row[static_cast<std::size_t>(k)], "symbol term");
        }
        out.push_back({std::move(a), std::move(c)});
    }
    try {
        return OperatorSymbol(m, d, n, std::move(out));
    } catch (const SchemaError&) {
        throw;
    } catch (const ValidationError& e) {
        throw SchemaError(e.what());
    }
}

Json thick_set_to_json(const ThickSet& set) {
    Json runs = Json::array();
    const auto ind = set.indicator();
    for (std::size_t i = 0; i < ind.size();) {
        if (!ind[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < ind.size() && ind[j]) ++j;
        runs.push_back(Json::array({i, j - i}));
        i = j;
    }
    Json cert = nullptr;
    if (set.certificate()) cert = Json{{"rho", set.certificate()->rho}, {"L", set.certificate()->L}};
    return Json{{"schema", "spectracontrol.thickset/1"}, {"grid", grid_to_json(set.grid())},
                {"cells", set.grid().cells()},           {"runs", runs},
                {"certificate", cert}};
}

ThickSet thick_set_from_json(const Json& j) {
    const auto grid = grid_from_json(require(j, "grid", "thick set"));
    std::vector<std::uint8_t> indicator(grid.cells(), 0);
    const auto& runs = require(j, "runs", "thick set");
    if (!runs.is_array()) throw SchemaError("thick set: 'runs' must be an array");
    for (const auto& r : runs) {
        if (!r.is_array() || r.size() != 2 || !r[0].is_number_unsigned() || !r[1].is_number_unsigned())
            throw SchemaError("thick set: runs must be [start, length] pairs of non-negative integers");
        const auto start = r[0].get<std::size_t>(), len = r[1].get<std::size_t>();
        if (start + len > indicator.size()) throw SchemaError("thick set: run exceeds the cell count");
        std::fill_n(indicator.begin() + static_cast<std::ptrdiff_t>(start), len, std::uint8_t{1});
    }
    ThickSet raw(grid, std::move(indicator));
    if (!j.contains("certificate") || j.at("certificate").is_null()) return raw;
    const auto& c = j.at("certificate");
    const Real rho = real_from_json(require(c, "rho", "certificate"), "certificate.rho");
    std::vector<Real> L;
    for (const auto& v : require(c, "L", "certificate")) L.push_back(real_from_json(v, "certificate.L"));
    const auto verified = raw.certified(L);
    if (rho > verified.certificate()->rho * (1.0 + 1e-12))
        throw SchemaError("thick set: certified rho exceeds the verified thickness " + format_real(verified.certificate()->rho));
    return verified;
}

void write_field(const std::filesystem::path& path, const SpectralField& field) {
    const auto& g = field.grid();
    std::array<unsigned char, 64> header{};
    std::memcpy(header.data(), "SPECFLD1", 8);
    put_u32(header, 8, static_cast<std::uint32_t>(g.dim));
    put_u32(header, 12, static_cast<std::uint32_t>(g.points));
    put_u32(header, 16, static_cast<std::uint32_t>(g.value_dim));
    put_u32(header, 20, g.x_norm == XNorm::One ? 1u : g.x_norm == XNorm::Two ? 2u : 0u);
    put_f64(header, 24, g.period);
    put_f64(header, 32, g.lp_exponent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(header.data()), 64);
    std::vector<unsigned char> body(field.values().size() * 8);
    std::size_t at = 0;
    for (const auto& z : field.values())
        for (float part : {static_cast<float>(z.real()), static_cast<float>(z.imag())}) {
            const auto bits = std::bit_cast<std::uint32_t>(part);
            for (int i = 0; i < 4; ++i) body[at++] = static_cast<unsigned char>(bits >> (8 * i));
        }
    out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
    Json side{{"format", "SPECFLD1"},
              {"grid", grid_to_json(g)},
              {"layout", "row-major cells (axis 0 slowest), n components contiguous"},
              {"dtype", "complex64 little-endian"},
              {"header_bytes", 64},
              {"samples", field.values().size()}};
    if (field.band()) side["band"] = *field.band();
    write_json(path.string() + ".json", side);
}

SpectralField read_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot read field file " + path.string());
    std::array<unsigned char, 64> header{};
    if (!in.read(reinterpret_cast<char*>(header.data()), 64)) throw SchemaError("field file: truncated header");
    if (std::memcmp(header.data(), "SPECFLD1", 8) != 0) throw SchemaError("field file: bad magic");
    GridSpec g;
    g.dim = static_cast<int>(get_u32(header, 8));
    g.points = static_cast<int>(get_u32(header, 12));
    g.value_dim = static_cast<int>(get_u32(header, 16));
    const auto qc = get_u32(header, 20);
    if (qc > 2) throw SchemaError("field file: unknown q code");
    g.x_norm = qc == 1 ? XNorm::One : qc == 2 ? XNorm::Two : XNorm::Inf;
    g.period = get_f64(header, 24);
    g.lp_exponent = get_f64(header, 32);
    try {
        g.validate();
    } catch (const ValidationError& e) {
        throw SchemaError(std::string("field file: ") + e.what());
    }
    std::vector<unsigned char> body(g.samples() * 8);
    if (!in.read(reinterpret_cast<char*>(body.data()), static_cast<std::streamsize>(body.size())))
        throw SchemaError("field file: truncated body");
    std::vector<Complex> values(g.samples());
    std::size_t at = 0;
    auto next_float = [&] {
        std::uint32_t bits = 0;
        for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(body[at++]) << (8 * i);
        return static_cast<Real>(std::bit_cast<float>(bits));
    };
    for (auto& z : values) {
        const Real re = next_float();
        z = Complex(re, next_float());
    }
    return SpectralField::from_values(g, std::move(values));
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot read " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const Json& doc) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

void TidyTable::add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::logic_error("tidy table: row width differs from the header");
    rows.push_back(std::move(row));
}

std::string format_real(Real v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const std::filesystem::path& path, const TidyTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i].name;
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, Real>)
                        out << format_real(v);
                    else if constexpr (std::is_same_v<T, long long>)
                        out << v;
                    else
                        out << '"' << v << '"';
                },
                row[i]);
        }
        out << '\n';
    }
    Json dict = Json::array();
    for (const auto& c : table.columns) dict.push_back(Json{{"name", c.name}, {"description", c.description}});
    write_json(path.string() + ".columns.json", Json{{"columns", dict}, {"rows", table.rows.size()}});
}

}  // namespace spectracontrol
