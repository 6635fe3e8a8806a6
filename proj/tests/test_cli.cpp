#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "porerec/cli.hpp"
#include "porerec/volume.hpp"

using namespace porerec;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("porerec_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

fs::path write_config(const fs::path& dir, const json& cfg) {
    fs::path p = dir / "config.json";
    write_file(p, cfg.dump(2));
    return p;
}

Image2D stripes(int side, int period) {
    Image2D img(side, side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) img.at(y, x) = (x % period) < period / 2 ? kPore : kSolid;
    return img;
}

int run_cmd(const std::string& command, const fs::path& config) {
    cli::Options opts;
    opts.command = command;
    opts.config_path = config.string();
    return cli::run(opts);
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    return json::parse(in);
}

std::vector<char> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("schema violations and bad invocations exit with code 2") {
    fs::path dir = fresh_dir("cli_schema");
    fs::path ref = dir / "ref.pgm";
    save_image(stripes(16, 4), ref.string());
    fs::path out = dir / "out";

    SUBCASE("unknown top-level key") {
        fs::path cfg = write_config(dir, {{"bogus", json::object()}});
        CHECK(run_cmd("analyze", cfg) == 2);
    }
    SUBCASE("unknown nested key") {
        json cfg = {{"input", {{"reference", ref.string()}}},
                    {"design", {{"m", 1}}},
                    {"train", {{"wat", 1}}},
                    {"output", {{"dir", out.string()}}}};
        CHECK(run_cmd("train", write_config(dir, cfg)) == 2);
    }
    SUBCASE("wrong value type") {
        json cfg = {{"input", {{"reference", ref.string()}}},
                    {"design", {{"m", "three"}}},
                    {"output", {{"dir", out.string()}}}};
        CHECK(run_cmd("design", write_config(dir, cfg)) == 2);
    }
    SUBCASE("out-of-range value") {
        json cfg = {{"design", {{"m", 0}}}, {"output", {{"dir", out.string()}}}};
        CHECK(run_cmd("design", write_config(dir, cfg)) == 2);
    }
    SUBCASE("analyze without an input image") {
        fs::path cfg = write_config(dir, {{"output", {{"dir", out.string()}}}});
        CHECK(run_cmd("analyze", cfg) == 2);
    }
    SUBCASE("missing config file") {
        CHECK(run_cmd("analyze", dir / "does_not_exist.json") == 2);
    }
    SUBCASE("config is not json") {
        fs::path cfg = dir / "broken.json";
        write_file(cfg, "{not json");
        CHECK(run_cmd("analyze", cfg) == 2);
    }
    SUBCASE("malformed --set") {
        cli::Options opts;
        opts.command = "design";
        opts.sets = {"noequals"};
        CHECK(cli::run(opts) == 2);
    }
    SUBCASE("enum value out of range") {
        json cfg = {{"input", {{"reference", ref.string()}}},
                    {"design", {{"m", 1}}},
                    {"train", {{"descriptor", "banana"}}},
                    {"output", {{"dir", out.string()}}}};
        CHECK(run_cmd("train", write_config(dir, cfg)) == 2);
    }
    SUBCASE("unknown command") {
        cli::Options opts;
        opts.command = "frobnicate";
        CHECK(cli::run(opts) == 2);
    }
}

TEST_CASE("runtime failures exit with code 3") {
    fs::path dir = fresh_dir("cli_runtime");
    fs::path out = dir / "out";

    SUBCASE("reconstruct with a missing model file") {
        json cfg = {{"reconstruct",
                     {{"model", (dir / "nope.mm01").string()},
                      {"dims", {4, 4, 4}},
                      {"phi_target", 0.4}}},
                    {"output", {{"dir", out.string()}}}};
        CHECK(run_cmd("reconstruct", write_config(dir, cfg)) == 3);
    }
    SUBCASE("evaluate on a continuous volume") {
        Volume3D cont = Volume3D::continuous(3, 3, 3, 1);
        for (std::size_t i = 0; i < cont.values.size(); ++i)
            cont.values[i] = static_cast<double>(i) / 27.0;
        fs::path vol = dir / "cont.mv01";
        save_volume(cont, vol.string());
        json cfg = {{"evaluate", {{"volume", vol.string()}, {"max_lag", 2}, {"lpd_window", 2}}},
                    {"output", {{"dir", out.string()}}}};
        CHECK(run_cmd("evaluate", write_config(dir, cfg)) == 3);
    }
    SUBCASE("annealing rejects anisotropic input") {
        fs::path ref = dir / "ref.pgm";
        save_image(stripes(16, 4), ref.string());
        json cfg = {{"input",
                     {{"references",
                       {{"xy", ref.string()}, {"xz", ref.string()}, {"yz", ref.string()}}}}},
                    {"sa", {{"dims", {12, 12}}, {"max_lag", 5}, {"max_swaps", 50}}},
                    {"output", {{"dir", out.string()}}}};
        CHECK(run_cmd("sa", write_config(dir, cfg)) == 3);
    }
}

TEST_CASE("the full pipeline emits every artifact") {
    fs::path dir = fresh_dir("cli_pipeline");
    fs::path ref = dir / "ref.pgm";
    save_image(stripes(24, 6), ref.string());
    fs::path out = dir / "out";

    json cfg = {
        {"input", {{"reference", ref.string()}}},
        {"design", {{"m", 1}, {"n", 3}}},
        {"train",
         {{"framework", "improved"},
          {"descriptor", "acf"},
          {"iterations", 3},
          {"slice_size", 8},
          {"acf_max_lag", 3},
          {"seed", 5},
          {"log_every", 0}}},
        {"reconstruct", {{"dims", {6, 6, 6}}, {"seed", 2}}},
        {"evaluate", {{"max_lag", 4}, {"lpd_window", 3}, {"lpd_bin_width", 0.1}}},
        {"sa", {{"dims", {12, 12}}, {"max_lag", 5}, {"max_swaps", 300}, {"seed", 3}}},
        {"output", {{"dir", out.string()}}}};
    fs::path cfg_path = write_config(dir, cfg);

    REQUIRE(run_cmd("analyze", cfg_path) == 0);
    REQUIRE(run_cmd("design", cfg_path) == 0);
    REQUIRE(run_cmd("train", cfg_path) == 0);
    REQUIRE(run_cmd("reconstruct", cfg_path) == 0);
    REQUIRE(run_cmd("evaluate", cfg_path) == 0);
    REQUIRE(run_cmd("sa", cfg_path) == 0);

    for (const char* f :
         {"s2_reference.csv", "analysis.json", "design.json", "model.mm01", "train_report.json",
          "recon_continuous.mv01", "recon_binary.mv01", "recon_report.json", "eval_s2.csv",
          "eval_l.csv", "eval_c2.csv", "eval_lpd.csv", "eval_summary.json", "sa_result.pgm",
          "sa_trace.csv", "sa_report.json", "manifest_analyze.json", "manifest_design.json",
          "manifest_train.json", "manifest_reconstruct.json", "manifest_evaluate.json",
          "manifest_sa.json"})
        CHECK_MESSAGE(fs::exists(out / f), f);

    // The stripe reference has porosity 1/2; without an explicit target the
    // reconstruction falls back to the porosity recorded by training.
    json recon = read_json(out / "recon_report.json");
    CHECK(recon["achieved_porosity"].get<double>() == 0.5);

    json summary = read_json(out / "eval_summary.json");
    REQUIRE(summary.contains("reference"));
    CHECK(summary["reference"]["porosity_error"].get<double>() == 0.0);
    CHECK(summary["reference"]["s2_mad"].get<double>() >= 0.0);

    json man = read_json(out / "manifest_train.json");
    CHECK(man["command"] == "train");
    CHECK(man["outputs"].contains("model.mm01"));
    CHECK(man["config"]["train"]["framework"] == "improved");
    CHECK(man["inputs"].contains(ref.string()));

    // A model trained for only three iterations reconstructs garbage, but the
    // loss it reports must at least be finite and present for all iterations.
    json train_rep = read_json(out / "train_report.json");
    CHECK(train_rep["loss_series"].size() == 3);

    SUBCASE("evaluate against itself as ground truth finds zero deviation") {
        json cfg2 = cfg;
        cfg2["evaluate"]["truth"] = (out / "recon_binary.mv01").string();
        REQUIRE(run_cmd("evaluate", write_config(dir, cfg2)) == 0);
        json s2 = read_json(out / "eval_summary.json");
        REQUIRE(s2.contains("truth"));
        CHECK(s2["truth"]["s2_mad"].get<double>() == 0.0);
        CHECK(s2["truth"]["l_mad"].get<double>() == 0.0);
        CHECK(s2["truth"]["c2_mad"].get<double>() == 0.0);
        CHECK(s2["truth"]["lpd_mad"].get<double>() == 0.0);
        CHECK(s2["truth"]["porosity_error"].get<double>() == 0.0);
        for (const char* f : {"eval_s2_truth.csv", "eval_l_truth.csv", "eval_c2_truth.csv",
                              "eval_lpd_truth.csv"})
            CHECK(fs::exists(out / f));
    }
    SUBCASE("anisotropic analyze writes one curve per orientation") {
        json cfg3 = {{"input",
                      {{"references",
                        {{"xy", ref.string()}, {"xz", ref.string()}, {"yz", ref.string()}}}}},
                     {"output", {{"dir", (dir / "aniso").string()}}}};
        REQUIRE(run_cmd("analyze", write_config(dir, cfg3)) == 0);
        for (const char* f : {"s2_reference_xy.csv", "s2_reference_xz.csv", "s2_reference_yz.csv"})
            CHECK(fs::exists(dir / "aniso" / f));
    }
}

TEST_CASE("identical seeds give byte-identical model and volumes") {
    fs::path dir = fresh_dir("cli_repro");
    fs::path ref = dir / "ref.pgm";
    save_image(stripes(24, 6), ref.string());

    auto run_into = [&](const std::string& sub) {
        fs::path out = dir / sub;
        json cfg = {{"input", {{"reference", ref.string()}}},
                    {"design", {{"m", 1}, {"n", 3}}},
                    {"train",
                     {{"framework", "improved"},
                      {"descriptor", "acf"},
                      {"iterations", 3},
                      {"slice_size", 8},
                      {"acf_max_lag", 3},
                      {"seed", 11},
                      {"log_every", 0}}},
                    {"reconstruct", {{"dims", {6, 6, 6}}, {"seed", 4}}},
                    {"output", {{"dir", out.string()}}}};
        fs::path cfg_path = dir / (sub + ".json");
        write_file(cfg_path, cfg.dump());
        REQUIRE(run_cmd("train", cfg_path) == 0);
        REQUIRE(run_cmd("reconstruct", cfg_path) == 0);
        return out;
    };

    fs::path a = run_into("run_a");
    fs::path b = run_into("run_b");
    CHECK(read_bytes(a / "model.mm01") == read_bytes(b / "model.mm01"));
    CHECK(read_bytes(a / "recon_continuous.mv01") == read_bytes(b / "recon_continuous.mv01"));
    CHECK(read_bytes(a / "recon_binary.mv01") == read_bytes(b / "recon_binary.mv01"));
}

TEST_CASE("--set and --seed overrides land in the effective config") {
    fs::path dir = fresh_dir("cli_overrides");
    fs::path out = dir / "out";

    cli::Options opts;
    opts.command = "design";
    opts.out_dir = out.string();
    opts.seed = 77;
    opts.sets = {"design.m=2", "design.n=4"};
    REQUIRE(cli::run(opts) == 0);

    json design = read_json(out / "design.json");
    CHECK(design["conv3_blocks"] == 2);
    CHECK(design["channels"] == 4);
    CHECK(design["receptive_field"] == 5);

    json man = read_json(out / "manifest_design.json");
    CHECK(man["config"]["train"]["seed"] == 77);
    CHECK(man["config"]["design"]["m"] == 2);
}
