#pragma once

#include "spectracontrol/elliptic_symbols.hpp"
#include "spectracontrol/spectral_grid.hpp"
#include "spectracontrol/thick_sets.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace spectracontrol {

using Json = nlohmann::ordered_json;

/// Malformed or inconsistent input documents.
class SchemaError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// JSON number, with non-finite values spelled "inf", "-inf", "nan".
Json json_real(Real v);
Real real_from_json(const Json& j, const std::string& what);

Json grid_to_json(const GridSpec& grid);
GridSpec grid_from_json(const Json& j);

/// Symbol document {"m", "d", "n", "terms": [{"alpha": [...], "matrix": [[...]]}]}.
/// Matrix entries are numbers or [re, im] pairs.
Json symbol_to_json(const OperatorSymbol& symbol);
OperatorSymbol symbol_from_json(const Json& j);

/// Thick set document with run-length encoded cells [[start, length], ...] over the
/// flattened cell index, plus the certificate (or null).
Json thick_set_to_json(const ThickSet& set);
/// A stored certificate is re-verified; a claimed rho above the verified one is a schema error.
ThickSet thick_set_from_json(const Json& j);

/// 64-byte header "SPECFLD1", u32 d, N, n, q-code (1, 2, 0 for inf), f64 Q, f64 p, zero padding;
/// then the physical samples as little-endian complex64 in the grid layout. A JSON sidecar
/// "<path>.json" describes the same grid.
void write_field(const std::filesystem::path& path, const SpectralField& field);
SpectralField read_field(const std::filesystem::path& path);

Json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& doc);

/// Long-format table; every cell is a number or a string.
struct TidyTable {
    struct Column {
        std::string name;
        std::string description;
    };
    using Cell = std::variant<Real, long long, std::string>;

    std::vector<Column> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row);
};

/// Writes the CSV and its column dictionary "<path>.columns.json".
void write_csv(const std::filesystem::path& path, const TidyTable& table);
std::string format_real(Real v);

}  // namespace spectracontrol
