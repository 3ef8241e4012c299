#include "spectracontrol/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace spectracontrol;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "spectracontrol_io_test";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("field container round trip") {
    GridSpec g;
    g.dim = 2;
    g.points = 16;
    g.period = 4.0;
    g.value_dim = 2;
    g.x_norm = XNorm::Inf;
    g.lp_exponent = 3.0;
    const auto f = white_noise(g, 8);
    const auto path = scratch("f.fld");
    write_field(path, f);
    CHECK(fs::file_size(path) == 64 + g.samples() * 8);
    const auto back = read_field(path);
    CHECK(back.grid() == g);
    for (std::size_t i = 0; i < g.samples(); ++i) {
        const auto z = f.values()[i];
        const Complex expect(static_cast<float>(z.real()), static_cast<float>(z.imag()));
        CHECK(std::abs(back.values()[i] - expect) <= 1e-12 * (1.0 + std::abs(expect)));
    }
    const auto side = read_json(path.string() + ".json");
    CHECK(side["format"] == "SPECFLD1");
    CHECK(side["grid"]["d"] == 2);

    std::ofstream(scratch("bad.fld"), std::ios::binary) << "NOTAFIELD";
    CHECK_THROWS_AS(read_field(scratch("bad.fld")), SchemaError);
}

TEST_CASE("symbol document round trip") {
    const auto doc = Json::parse(R"({"m":2,"d":1,"n":2,"terms":[
        {"alpha":[2],"matrix":[[1,0],[0,1]]},
        {"alpha":[0],"matrix":[[0,[1,0.5]],[0,0]]}]})");
    const auto s = symbol_from_json(doc);
    CHECK(s.order() == 2);
    CHECK(s.value_dim() == 2);
    const std::vector<Real> xi{2.0};
    CHECK(s.evaluate(xi)(0, 1) == Complex(1.0, 0.5));
    CHECK(symbol_from_json(symbol_to_json(s)).fingerprint() == s.fingerprint());
    CHECK_THROWS_AS(symbol_from_json(Json::parse(R"({"m":2,"d":1,"n":2})")), SchemaError);
    CHECK_THROWS_AS(symbol_from_json(Json::parse(R"({"m":2,"d":1,"n":1,"terms":[{"alpha":[1],"matrix":[[1]]}]})")),
                    SchemaError);
}

TEST_CASE("thick set document round trip and certificate re-verification") {
    GridSpec g;
    g.points = 128;
    g.period = 8.0;
    const auto E = make_stripes(g, 1.0, 2.0, 0);
    auto doc = thick_set_to_json(E);
    CHECK(doc["runs"].size() == 4);
    const auto back = thick_set_from_json(doc);
    CHECK(std::equal(back.indicator().begin(), back.indicator().end(), E.indicator().begin()));
    CHECK(back.certificate()->rho == doctest::Approx(0.5));
    doc["certificate"]["rho"] = 0.8;
    CHECK_THROWS_AS(thick_set_from_json(doc), SchemaError);
}

TEST_CASE("tidy csv with column dictionary") {
    TidyTable t;
    t.columns = {{"t", "time"}, {"lambda", "cutoff"}};
    const auto empty = scratch("empty.csv");
    write_csv(empty, t);
    std::ifstream in(empty);
    std::string header, rest;
    std::getline(in, header);
    CHECK(header == "t,lambda");
    CHECK_FALSE(std::getline(in, rest));
    CHECK(read_json(empty.string() + ".columns.json")["columns"].size() == 2);
    CHECK_THROWS(t.add({1.0}));
    CHECK(format_real(0.1) == "0.10000000000000001");
    CHECK(json_real(kInf) == "inf");
}
