#include "cli_support.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace spectracontrol::cli {

namespace fs = std::filesystem;

Report::Report(std::string command) : command_(std::move(command)) {}

void Report::check(const std::string& name, Real lhs, Real rhs, Json context, std::optional<bool> holds) {
    const bool ok = holds.value_or(lhs <= rhs);
    assertions_.push_back(Json{{"name", name},
                               {"lhs", json_real(lhs)},
                               {"rhs", json_real(rhs)},
                               {"slack", json_real(rhs - lhs)},
                               {"holds", ok}});
    if (!ok && counterexample_.is_null()) {
        counterexample_ = Json{{"name", name}, {"lhs", json_real(lhs)}, {"rhs", json_real(rhs)}, {"context", context}};
    }
    pass_ = pass_ && ok;
}

void Report::fail(const std::string& error) {
    error_ = error;
    pass_ = false;
}

Json Report::document() const {
    Json doc{{"schema_version", 1},
             {"command", command_},
             {"parameters", parameters},
             {"results", results},
             {"assertions", assertions_},
             {"pass", pass_},
             {"counterexample", counterexample_}};
    if (error_) doc["error"] = *error_;
    return doc;
}

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, sep)) out.push_back(item);
    if (!text.empty() && text.back() == sep) out.emplace_back();
    return out;
}

Real parse_real(const std::string& s, const char* field) {
    if (s == "inf") return kInf;
    try {
        std::size_t used = 0;
        const Real v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ValidationError(std::string(field) + ": '" + s + "' is not a number");
}

fs::path resolve(const std::string& path, const fs::path& base) {
    const fs::path p(path);
    return p.is_absolute() || base.empty() ? p : base / p;
}

OperatorSymbol builtin_symbol(const std::string& name, int dim, int n) {
    if (name == "heat") return OperatorSymbol::heat(dim, n);
    if (name == "biharmonic") return OperatorSymbol::polyharmonic(dim, 2, n);
    if (name == "transport") {
        MultiIndex a(static_cast<std::size_t>(dim), 0);
        a[0] = 1;
        return OperatorSymbol(1, dim, n, {{a, CMatrix::Identity(n, n) * Complex(0.0, 1.0)}});
    }
    if (name == "coupled") {
        if (n != 2) throw ValidationError("symbol: 'coupled' requires n = 2");
        std::vector<SymbolTerm> terms;
        for (int j = 0; j < dim; ++j) {
            MultiIndex a(static_cast<std::size_t>(dim), 0);
            a[static_cast<std::size_t>(j)] = 2;
            terms.push_back({a, CMatrix::Identity(2, 2)});
        }
        CMatrix B = CMatrix::Zero(2, 2);
        B(0, 1) = 1.0;
        terms.push_back({MultiIndex(static_cast<std::size_t>(dim), 0), B});
        return OperatorSymbol(2, dim, 2, std::move(terms));
    }
    throw std::out_of_range(name);
}

}  // namespace

std::vector<Real> parse_list(const std::string& text, const char* field) {
    std::vector<Real> out;
    for (const auto& item : split(text, ',')) out.push_back(parse_real(item, field));
    if (out.empty()) throw ValidationError(std::string(field) + ": empty list");
    return out;
}

std::vector<int> parse_ints(const std::string& text, const char* field) {
    std::vector<int> out;
    for (const Real v : parse_list(text, field)) {
        if (v != std::floor(v) || std::abs(v) > 1e6) throw ValidationError(std::string(field) + ": expected integers");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

std::vector<Real> per_axis(const std::vector<Real>& values, int dim, const char* field) {
    if (values.size() == 1) return std::vector<Real>(static_cast<std::size_t>(dim), values[0]);
    if (values.size() != static_cast<std::size_t>(dim))
        throw ValidationError(std::string(field) + ": expected one value or one per axis");
    return values;
}

OperatorSymbol load_symbol(const std::string& spec, int dim, int value_dim, const fs::path& base) {
    try {
        return builtin_symbol(spec, dim, value_dim);
    } catch (const std::out_of_range&) {
    }
    return symbol_from_json(read_json(resolve(spec, base)));
}

OperatorSymbol load_symbol(const Json& spec, int dim, int value_dim, const fs::path& base) {
    if (spec.is_string()) return load_symbol(spec.get<std::string>(), dim, value_dim, base);
    if (spec.is_object()) return symbol_from_json(spec);
    throw SchemaError("symbol: expected a name, a path or a symbol object");
}

ThickSet load_set(const std::string& spec, const GridSpec& grid, const fs::path& base) {
    const auto parts = split(spec, ':');
    const auto& kind = parts.front();
    if (kind == "full") {
        return ThickSet(grid, std::vector<std::uint8_t>(grid.cells(), 1))
            .certified(std::vector<Real>(static_cast<std::size_t>(grid.dim), grid.cell_width()));
    }
    if (kind == "empty") return ThickSet(grid, std::vector<std::uint8_t>(grid.cells(), 0));
    if (kind == "stripes") {
        if (parts.size() < 3 || parts.size() > 4) throw ValidationError("set: stripes expects stripes:ON:PERIOD[:AXIS]");
        const int axis = parts.size() == 4 ? static_cast<int>(parse_real(parts[3], "set axis")) : 0;
        return make_stripes(grid, parse_real(parts[1], "set on-width"), parse_real(parts[2], "set period"), axis);
    }
    if (kind == "random") {
        if (parts.size() < 3 || parts.size() > 4) throw ValidationError("set: random expects random:RHO:L[:SEED]");
        const auto seed = parts.size() == 4 ? static_cast<std::uint64_t>(parse_real(parts[3], "set seed")) : 0u;
        const std::vector<Real> L(static_cast<std::size_t>(grid.dim), parse_real(parts[2], "set L"));
        return make_random_thick(grid, parse_real(parts[1], "set rho"), L, seed);
    }
    auto set = thick_set_from_json(read_json(resolve(spec, base)));
    if (!(set.grid() == grid)) throw ValidationError("set: stored grid differs from --grid");
    return set;
}

ThickSet load_set(const Json& spec, const GridSpec& grid, const fs::path& base) {
    if (spec.is_string()) return load_set(spec.get<std::string>(), grid, base);
    if (spec.is_object()) {
        auto set = thick_set_from_json(spec);
        if (!(set.grid() == grid)) throw ValidationError("set: stored grid differs from the problem grid");
        return set;
    }
    throw SchemaError("set: expected a family string, a path or a thick-set object");
}

SpectralField load_field(const Json& spec, const GridSpec& grid, const fs::path& base) {
    std::string kind;
    Json lambda = nullptr;
    std::uint64_t seed = 0;
    if (spec.is_string()) {
        const auto text = spec.get<std::string>();
        const auto parts = split(text, ':');
        if (parts.front() == "white" && parts.size() == 2) {
            kind = "white_noise";
            seed = static_cast<std::uint64_t>(parse_real(parts[1], "y0 seed"));
        } else if (parts.front() == "band" && parts.size() == 3) {
            kind = "random_band_limited";
            lambda = parse_real(parts[1], "y0 lambda");
            seed = static_cast<std::uint64_t>(parse_real(parts[2], "y0 seed"));
        } else {
            auto f = read_field(resolve(text, base));
            if (!(f.grid() == grid)) throw ValidationError("y0: stored grid differs from the problem grid");
            return f;
        }
    } else if (spec.is_object()) {
        if (!spec.contains("kind") || !spec.at("kind").is_string()) throw SchemaError("y0: missing field 'kind'");
        kind = spec.at("kind").get<std::string>();
        if (spec.contains("seed")) {
            if (!spec.at("seed").is_number_unsigned()) throw SchemaError("y0: 'seed' must be a non-negative integer");
            seed = spec.at("seed").get<std::uint64_t>();
        }
        if (spec.contains("lambda")) lambda = spec.at("lambda");
    } else {
        throw SchemaError("y0: expected a string or an object");
    }
    if (kind == "white_noise") return white_noise(grid, seed);
    if (kind == "random_band_limited") {
        std::vector<Real> lam;
        if (lambda.is_array())
            for (const auto& v : lambda) lam.push_back(real_from_json(v, "y0.lambda"));
        else
            lam.push_back(real_from_json(lambda, "y0.lambda"));
        lam = per_axis(lam, grid.dim, "y0.lambda");
        check_resolvable(grid, lam);
        return random_band_limited(grid, lam, seed);
    }
    throw SchemaError("y0: unknown kind '" + kind + "'");
}

std::vector<std::string> config_tokens(const Json& config, const std::string& command,
                                       const std::vector<std::string>& known_keys) {
    if (!config.is_object()) throw SchemaError("config: top level must be an object");
    std::vector<std::string> out;
    for (const auto& [key, value] : config.items()) {
        if (key == "schema_version") {
            if (!value.is_number_integer() || value.get<int>() != 1)
                throw SchemaError("config: unsupported schema_version (expected 1)");
            continue;
        }
        if (key == "command") {
            if (!value.is_string() || value.get<std::string>() != command)
                throw SchemaError("config: field 'command' does not match '" + command + "'");
            continue;
        }
        if (std::find(known_keys.begin(), known_keys.end(), key) == known_keys.end())
            throw SchemaError("config: unknown field '" + key + "' for '" + command + "'");
        std::string text;
        auto scalar = [&](const Json& v) -> std::string {
            if (v.is_string()) return v.get<std::string>();
            if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
            if (v.is_number_integer()) return v.dump();
            if (v.is_number()) return format_real(v.get<Real>());
            throw SchemaError("config: field '" + key + "' must hold scalars");
        };
        if (value.is_array()) {
            for (std::size_t i = 0; i < value.size(); ++i) text += (i ? "," : "") + scalar(value[i]);
        } else {
            text = scalar(value);
        }
        out.push_back("--" + key + "=" + text);
    }
    return out;
}

}  // namespace spectracontrol::cli
