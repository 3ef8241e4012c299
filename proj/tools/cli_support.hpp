#pragma once

#include "spectracontrol/elliptic_symbols.hpp"
#include "spectracontrol/io.hpp"
#include "spectracontrol/spectral_grid.hpp"
#include "spectracontrol/thick_sets.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spectracontrol::cli {

/// Exit codes of every subcommand.
enum Exit : int { kOk = 0, kAssertionFailed = 1, kInvalid = 2 };

/// One run's JSON summary plus its tidy table. Every asserted inequality appears once in
/// `assertions`; the first violated one is copied into `counterexample` with its context.
class Report {
public:
    explicit Report(std::string command);

    Json parameters = Json::object();
    Json results = Json::object();
    TidyTable table;

    /// Records lhs <= rhs; `holds` overrides the comparison when the check carries its own
    /// tolerance.
    void check(const std::string& name, Real lhs, Real rhs, Json context = nullptr, std::optional<bool> holds = {});
    void fail(const std::string& error);

    bool passed() const { return pass_; }
    Json document() const;

private:
    std::string command_;
    Json assertions_ = Json::array();
    Json counterexample_ = nullptr;
    std::optional<std::string> error_;
    bool pass_ = true;
};

/// Comma-separated reals ("1,2,4"); "inf" accepted.
std::vector<Real> parse_list(const std::string& text, const char* field);
std::vector<int> parse_ints(const std::string& text, const char* field);
/// A single value is repeated on every axis.
std::vector<Real> per_axis(const std::vector<Real>& values, int dim, const char* field);

/// "heat", "biharmonic", "transport", "coupled" (n = 2: |xi|^2 I + [[0,1],[0,0]]), or a JSON path.
OperatorSymbol load_symbol(const std::string& spec, int dim, int value_dim, const std::filesystem::path& base = {});
OperatorSymbol load_symbol(const Json& spec, int dim, int value_dim, const std::filesystem::path& base);

/// "stripes:ON:PERIOD[:AXIS]", "random:RHO:L[:SEED]", "full", "empty", or a thick-set JSON path.
ThickSet load_set(const std::string& spec, const GridSpec& grid, const std::filesystem::path& base = {});
ThickSet load_set(const Json& spec, const GridSpec& grid, const std::filesystem::path& base);

/// "white:SEED", "band:LAMBDA:SEED", or a SPECFLD1 path; objects
/// {"kind": "white_noise" | "random_band_limited", "seed", "lambda"} in JSON.
SpectralField load_field(const Json& spec, const GridSpec& grid, const std::filesystem::path& base);

/// Config tokens "--key=value" for the subcommand path, checked against the known keys.
std::vector<std::string> config_tokens(const Json& config, const std::string& command,
                                       const std::vector<std::string>& known_keys);

}  // namespace spectracontrol::cli
