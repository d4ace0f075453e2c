#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pgkm/cli.hpp"
#include "pgkm/formats.hpp"
#include "support.hpp"

using namespace pgkm;
using namespace pgkm::testing;
namespace fs = std::filesystem;

namespace {

struct Workspace {
    fs::path dir;

    explicit Workspace(const std::string& name) {
        dir = fs::temp_directory_path() / ("pgkm_cli_" + name);
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }

    void tensor(const std::string& file, const std::string& name, LayerKind kind, std::size_t rows,
                std::size_t cols, std::uint64_t seed) const {
        auto w = random_matrix(rows * cols, 1, seed);
        write_tensor_file(dir / file, {name, kind, {rows, cols, w.values()}});
    }
    void text(const std::string& file, const std::string& body) const {
        std::ofstream(dir / file) << body;
    }
};

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "pgkm");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("quantize a two-layer manifest") {
    Workspace ws("two_layer");
    ws.tensor("emb.pgw", "embed", LayerKind::embedding, 16, 64, 1);
    ws.tensor("fc.pgw", "fc", LayerKind::linear, 32, 32, 2);
    ws.text("m.json", R"({"schema": 1, "layers": [
        {"file": "emb.pgw", "block_size": 4, "num_centroids": 32},
        {"file": "fc.pgw", "block_size": 8, "num_centroids": 16, "method": "baseline"}]})");
    const auto out = ws.dir / "out";
    auto r = invoke({"quantize", (ws.dir / "m.json").string(), out.string(), "--report", "csv"});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(out / "emb.pgq1"));
    CHECK(fs::exists(out / "fc.pgq1"));
    CHECK(fs::exists(out / "report.csv"));
    auto report = read_json(out / "report.json");
    CHECK(report["schema"] == 1);
    REQUIRE(report["layers"].size() == 2);
    CHECK(report["layers"][0]["name"] == "embed");
    CHECK(report["layers"][1]["method"] == "baseline");
    CHECK(report["summary"]["by_kind"].contains("embedding"));
    CHECK(report["summary"]["by_kind"].contains("linear"));

    auto q = read_quantized_file(out / "emb.pgq1");
    CHECK(q.spec.name == "embed");
    CHECK(q.spec.num_centroids == 32);

    // Dequantize round trip reproduces the in-memory reconstruction.
    auto d = invoke({"dequantize", (out / "emb.pgq1").string(), (ws.dir / "emb_r.pgw").string()});
    REQUIRE(d.code == 0);
    auto rec = read_tensor_file(ws.dir / "emb_r.pgw");
    CHECK(rec.tensor == dequantize(q));
    CHECK(rec.name == "embed");
    CHECK(reconstruction_mse(read_tensor_file(ws.dir / "emb.pgw").tensor, rec.tensor) ==
          doctest::Approx(q.report.mse).epsilon(1e-6));

    auto i = invoke({"inspect", (out / "emb.pgq1").string()});
    CHECK(i.code == 0);
    CHECK(nlohmann::json::parse(i.out)["format"] == "PGQ1");
}

TEST_CASE("indivisible block size is a usage error naming the layer") {
    Workspace ws("indivisible");
    ws.tensor("a.pgw", "attn.q", LayerKind::linear, 10, 4, 1);
    ws.text("m.json", R"({"schema": 1, "layers": [{"file": "a.pgw", "block_size": 3, "num_centroids": 2}]})");
    auto r = invoke({"quantize", (ws.dir / "m.json").string(), (ws.dir / "out").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("attn.q") != std::string::npos);
    CHECK(r.err.find("10x4") != std::string::npos);
    CHECK_FALSE(fs::exists(ws.dir / "out" / "a.pgq1"));
}

TEST_CASE("manifest problems exit with the usage code") {
    Workspace ws("bad_manifest");
    ws.text("empty.json", R"({"schema": 1, "layers": []})");
    CHECK(invoke({"quantize", (ws.dir / "empty.json").string(), (ws.dir / "o").string()}).code == 2);
    ws.text("missing.json", R"({"schema": 1, "layers": [{"file": "nope.pgw", "block_size": 1, "num_centroids": 1}]})");
    CHECK(invoke({"quantize", (ws.dir / "missing.json").string(), (ws.dir / "o").string()}).code == 2);
    CHECK(invoke({"quantize", (ws.dir / "absent.json").string(), (ws.dir / "o").string()}).code == 2);
    CHECK(invoke({"frobnicate"}).code == 2);
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("pg_full differs from pg only in dense fields and metrics") {
    Workspace ws("methods");
    ws.tensor("a.pgw", "layer", LayerKind::linear, 8, 256, 3);
    ws.text("m.json", R"({"schema": 1, "layers": [{"file": "a.pgw", "block_size": 4, "num_centroids": 16}]})");
    const auto m = (ws.dir / "m.json").string();
    REQUIRE(invoke({"quantize", m, (ws.dir / "pg").string(), "--method", "pg"}).code == 0);
    REQUIRE(invoke({"quantize", m, (ws.dir / "full").string(), "--method", "pg_full", "--epsilon", "0.05"}).code == 0);
    auto a = read_json(ws.dir / "pg" / "report.json")["layers"][0];
    auto b = read_json(ws.dir / "full" / "report.json")["layers"][0];
    CHECK(a["method"] == "pg");
    CHECK(b["method"] == "pg_full");
    CHECK_FALSE(a["report"].contains("dense"));
    REQUIRE(b["report"].contains("dense"));
    for (auto* key : {"name", "kind", "rows", "cols", "block_size", "num_centroids", "seed"}) {
        CHECK(a[key] == b[key]);
    }
    for (auto* key : {"compressed_bytes", "original_bytes", "compression_ratio"}) {
        CHECK(a["report"][key] == b["report"][key]);
    }
}

TEST_CASE("corrupt or foreign files are rejected") {
    Workspace ws("corrupt");
    ws.text("junk.pgq1", "PGQ1 this is not a quantized layer");
    auto r = invoke({"dequantize", (ws.dir / "junk.pgq1").string(), (ws.dir / "x.pgw").string()});
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());
    CHECK(invoke({"inspect", (ws.dir / "junk.pgq1").string()}).code == 2);
    ws.tensor("t.pgw", "t", LayerKind::linear, 2, 2, 1);
    CHECK(invoke({"dequantize", (ws.dir / "t.pgw").string(), (ws.dir / "x.pgw").string()}).code == 2);
    auto i = invoke({"inspect", (ws.dir / "t.pgw").string()});
    CHECK(i.code == 0);
    CHECK(nlohmann::json::parse(i.out)["format"] == "PGW1");
}

TEST_CASE("bench writes byte-stable CSV") {
    Workspace ws("bench");
    ws.text("suite.json", R"({"schema": 1, "methods": ["baseline", "pg", "pg_full"], "seed_count": 2,
        "instances": [{"family": "skewed_mass", "n": 3000, "b": 4, "k": 64}]})");
    const auto suite = (ws.dir / "suite.json").string();
    REQUIRE(invoke({"bench", suite, "--out-dir", (ws.dir / "a").string(), "--seed", "7"}).code == 0);
    REQUIRE(invoke({"bench", suite, "--out-dir", (ws.dir / "b").string(), "--seed", "7", "--jobs", "2"}).code == 0);
    const auto a = read_file(ws.dir / "a" / "bench.csv");
    CHECK(a == read_file(ws.dir / "b" / "bench.csv"));
    // Header plus two seeds times two challengers.
    CHECK(std::count(a.begin(), a.end(), '\n') == 5);
    CHECK(read_json(ws.dir / "a" / "bench.json")["schema"] == 1);
    CHECK(invoke({"bench", "--out-dir", (ws.dir / "c").string()}).code == 2);
}
