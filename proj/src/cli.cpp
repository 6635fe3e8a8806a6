#include "porerec/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "json.hpp"
#include "porerec/binio.hpp"
#include "porerec/descriptors.hpp"
#include "porerec/losses.hpp"
#include "porerec/network.hpp"
#include "porerec/optimizer.hpp"
#include "porerec/reconstructor.hpp"
#include "porerec/sa.hpp"
#include "porerec/trainer.hpp"
#include "porerec/volume.hpp"

namespace porerec::cli {
namespace {

using nlohmann::json;

// ---------------------------------------------------------------- config ---

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
}

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
}

void reject_unknown(const json& obj, const std::string& path,
                    const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            fail(path.empty() ? it.key() : path + "." + it.key(),
                 "unknown key");
    }
}

const json* find(const json& obj, const std::string& key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double get_num(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

double num_or(const json& obj, const std::string& path, const std::string& key,
              double dflt) {
    const json* j = find(obj, key);
    return j ? get_num(*j, path + "." + key) : dflt;
}

std::int64_t get_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<std::int64_t>();
}

std::int64_t int_or(const json& obj, const std::string& path,
                    const std::string& key, std::int64_t dflt) {
    const json* j = find(obj, key);
    return j ? get_int(*j, path + "." + key) : dflt;
}

std::string get_str(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

std::string str_or(const json& obj, const std::string& path,
                   const std::string& key, const std::string& dflt) {
    const json* j = find(obj, key);
    return j ? get_str(*j, path + "." + key) : dflt;
}

std::vector<int> int_list(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(static_cast<int>(
            get_int(j[i], path + "[" + std::to_string(i) + "]")));
    return out;
}

std::vector<double> num_list(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(get_num(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

json section_or_empty(const json& cfg, const std::string& key) {
    const json* j = find(cfg, key);
    if (!j) return json::object();
    require_object(*j, key);
    return *j;
}

// Applies one "a.b.c=value" override; the value is parsed as JSON when
// possible and treated as a plain string otherwise.
void apply_set(json& cfg, const std::string& expr) {
    auto eq = expr.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--set expects key.path=value, got '" + expr + "'");
    std::string path = expr.substr(0, eq);
    std::string raw = expr.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &cfg;
    std::size_t start = 0;
    while (true) {
        auto dot = path.find('.', start);
        std::string key = path.substr(start, dot - start);
        if (key.empty())
            throw ConfigError("--set has an empty key in '" + expr + "'");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        json& next = (*node)[key];
        if (!next.is_object()) next = json::object();
        node = &next;
        start = dot + 1;
    }
}

json load_config(const Options& opts) {
    json cfg = json::object();
    if (opts.config_path) {
        std::ifstream in(*opts.config_path);
        if (!in)
            throw ConfigError("cannot open config file " + *opts.config_path);
        cfg = json::parse(in, nullptr, false);
        if (cfg.is_discarded())
            throw ConfigError("config file " + *opts.config_path +
                              " is not valid JSON");
        require_object(cfg, "config");
    }
    for (const auto& s : opts.sets) apply_set(cfg, s);
    if (opts.out_dir) cfg["output"]["dir"] = *opts.out_dir;
    if (opts.seed) {
        cfg["train"]["seed"] = *opts.seed;
        cfg["reconstruct"]["seed"] = *opts.seed;
        cfg["sa"]["seed"] = *opts.seed;
    }
    reject_unknown(cfg, "", {"input", "design", "train", "reconstruct",
                             "evaluate", "sa", "output"});
    return cfg;
}

// ----------------------------------------------------------------- inputs ---

struct Inputs {
    ReferenceSet refs;
    std::vector<std::string> paths;  // one (isotropic) or three (xy, xz, yz)
};

Inputs load_inputs(const json& cfg) {
    json input = section_or_empty(cfg, "input");
    reject_unknown(input, "input", {"reference", "references"});
    const json* single = find(input, "reference");
    const json* triple = find(input, "references");
    if (single && triple)
        fail("input", "give either 'reference' or 'references', not both");
    Inputs in;
    if (single) {
        std::string p = get_str(*single, "input.reference");
        in.refs = ReferenceSet::isotropic(load_image(p));
        in.paths = {p};
    } else if (triple) {
        require_object(*triple, "input.references");
        reject_unknown(*triple, "input.references", {"xy", "xz", "yz"});
        std::string px, py, pz;
        for (auto [key, dst] :
             {std::pair<const char*, std::string*>{"xy", &px},
              {"xz", &py},
              {"yz", &pz}}) {
            const json* j = find(*triple, key);
            if (!j) fail(std::string("input.references.") + key, "missing");
            *dst = get_str(*j, std::string("input.references.") + key);
        }
        in.refs = ReferenceSet::from_three(load_image(px), load_image(py),
                                           load_image(pz));
        in.paths = {px, py, pz};
    } else {
        fail("input", "missing 'reference' (or 'references') image path");
    }
    return in;
}

// ----------------------------------------------------------------- output ---

std::filesystem::path out_dir(const json& cfg) {
    json output = section_or_empty(cfg, "output");
    reject_unknown(output, "output", {"dir"});
    std::filesystem::path dir = str_or(output, "output", "dir", "out");
    std::filesystem::create_directories(dir);
    return dir;
}

std::uint32_t file_crc32(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p + " for hashing");
    binio::Crc32 crc;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        crc.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return crc.value();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream outf(p, std::ios::binary);
    if (!outf) throw std::runtime_error("cannot write " + p.string());
    outf << text;
}

void write_json(const std::filesystem::path& p, const json& j) {
    write_text(p, j.dump(2) + "\n");
}

// Every command records what it read, what it wrote, and the exact config
// (after overrides) so a run can be replayed from the manifest alone.
void write_manifest(const std::filesystem::path& dir,
                    const std::string& command, const json& cfg,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::filesystem::path>& outputs) {
    json man;
    man["command"] = command;
    man["version"] = kVersion;
    man["config"] = cfg;
    json jin = json::object();
    for (const auto& p : inputs) jin[p] = file_crc32(p);
    man["inputs"] = jin;
    json jout = json::object();
    for (const auto& p : outputs)
        jout[p.filename().string()] = file_crc32(p.string());
    man["outputs"] = jout;
    write_json(dir / ("manifest_" + command + ".json"), man);
}

// ------------------------------------------------------------- descriptors ---

int auto_max_lag(int min_side, std::int64_t requested, const std::string& path) {
    if (requested > 0) {
        if (requested >= min_side)
            fail(path, "must be smaller than the smallest grid side");
        return static_cast<int>(requested);
    }
    return std::min(64, min_side - 1);
}

struct RefAnalysis {
    double phi = 0.0;
    DescriptorCurve s2;
    CorrelationLength lcor;
};

RefAnalysis analyze_reference(const Image2D& img, const json& design) {
    RefAnalysis a;
    a.phi = porosity(img).value;
    int max_lag =
        auto_max_lag(std::min(img.width, img.height),
                     int_or(design, "design", "analyze_max_lag", 0),
                     "design.analyze_max_lag");
    a.s2 = two_point_probability(img, max_lag);
    a.lcor = autocorrelation_distance(
        a.s2, PhaseFraction{a.phi},
        num_or(design, "design", "lcor_eps_rel", 0.05),
        static_cast<int>(int_or(design, "design", "lcor_window", 3)));
    return a;
}

NetworkSpec spec_from_config(const json& cfg, const Inputs* in,
                             std::vector<std::string>* warnings) {
    json design = section_or_empty(cfg, "design");
    reject_unknown(design, "design",
                   {"m", "n", "m_cap", "analyze_max_lag", "lcor_eps_rel",
                    "lcor_window"});
    int n = static_cast<int>(int_or(design, "design", "n", 16));
    if (n < 1) fail("design.n", "must be positive");
    int m_cap = static_cast<int>(int_or(design, "design", "m_cap", 12));
    if (m_cap < 1) fail("design.m_cap", "must be positive");
    if (const json* jm = find(design, "m")) {
        int m = static_cast<int>(get_int(*jm, "design.m"));
        if (m < 1) fail("design.m", "must be positive");
        NetworkSpec spec;
        spec.conv3_blocks = m;
        spec.channels = n;
        return spec;
    }
    if (!in) fail("design.m", "required when no reference image is given");
    // Depth rule: size for the largest correlation length over the references.
    CorrelationLength worst{1, true};
    for (const Image2D& img : in->refs.images) {
        RefAnalysis a = analyze_reference(img, design);
        if (!a.lcor.converged) worst.converged = false;
        worst.l_cor = std::max(worst.l_cor, a.lcor.l_cor);
        if (!in->refs.anisotropic) break;
    }
    NetworkSpec spec = design_from_prior(worst, n, m_cap);
    if (warnings && !spec.warning.empty()) warnings->push_back(spec.warning);
    return spec;
}

json curve_json(const DescriptorCurve& c) {
    json j;
    j["lags"] = c.lags;
    j["mean"] = c.mean;
    return j;
}

double curve_mad(const std::vector<double>& a, const std::vector<double>& b) {
    std::size_t n = std::min(a.size(), b.size());
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::fabs(a[i] - b[i]);
    return acc / static_cast<double>(n);
}

// ---------------------------------------------------------------- analyze ---

int cmd_analyze(const json& cfg) {
    Inputs in = load_inputs(cfg);
    json design = section_or_empty(cfg, "design");
    std::filesystem::path dir = out_dir(cfg);

    static const char* names[3] = {"xy", "xz", "yz"};
    json report;
    std::vector<std::filesystem::path> outputs;
    std::vector<std::string> warnings;
    NetworkSpec spec = spec_from_config(cfg, &in, &warnings);
    json per = json::array();
    std::size_t nrefs = in.refs.anisotropic ? 3 : 1;
    for (std::size_t i = 0; i < nrefs; ++i) {
        RefAnalysis a = analyze_reference(in.refs.images[i], design);
        json r;
        r["path"] = in.paths[i];
        r["porosity"] = a.phi;
        r["correlation_length"] = a.lcor.l_cor;
        r["converged"] = a.lcor.converged;
        r["s2"] = curve_json(a.s2);
        per.push_back(r);
        std::string csv = in.refs.anisotropic
                              ? std::string("s2_reference_") + names[i] + ".csv"
                              : std::string("s2_reference.csv");
        write_text(dir / csv, to_csv(a.s2));
        outputs.push_back(dir / csv);
        if (!a.lcor.converged)
            warnings.push_back("correlation length did not converge for " +
                               in.paths[i]);
    }
    report["references"] = per;
    report["recommended"] = {{"conv3_blocks", spec.conv3_blocks},
                             {"channels", spec.channels},
                             {"receptive_field", spec.receptive_field()}};
    report["warnings"] = warnings;
    write_json(dir / "analysis.json", report);
    outputs.push_back(dir / "analysis.json");
    write_manifest(dir, "analyze", cfg, in.paths, outputs);

    for (const auto& r : per)
        std::printf("%s: porosity %.4f, correlation length %d%s\n",
                    r["path"].get<std::string>().c_str(),
                    r["porosity"].get<double>(),
                    r["correlation_length"].get<int>(),
                    r["converged"].get<bool>() ? "" : " (not converged)");
    std::printf(
        "recommended network: %d conv3 blocks, %d channels "
        "(receptive field %d)\n",
        spec.conv3_blocks, spec.channels, spec.receptive_field());
    return 0;
}

// ----------------------------------------------------------------- design ---

int cmd_design(const json& cfg) {
    const json* input = find(cfg, "input");
    std::optional<Inputs> in;
    if (input && input->is_object() && !input->empty()) in = load_inputs(cfg);
    std::vector<std::string> warnings;
    NetworkSpec spec = spec_from_config(cfg, in ? &*in : nullptr, &warnings);
    std::filesystem::path dir = out_dir(cfg);

    json report;
    report["conv3_blocks"] = spec.conv3_blocks;
    report["channels"] = spec.channels;
    report["out_channels"] = spec.out_channels;
    report["receptive_field"] = spec.receptive_field();
    report["warnings"] = warnings;
    write_json(dir / "design.json", report);
    write_manifest(dir, "design", cfg,
                   in ? in->paths : std::vector<std::string>{},
                   {dir / "design.json"});
    std::printf("network: %d conv3 blocks, %d channels (receptive field %d)\n",
                spec.conv3_blocks, spec.channels, spec.receptive_field());
    for (const auto& w : warnings) std::printf("warning: %s\n", w.c_str());
    return 0;
}

// ------------------------------------------------------------------ train ---

TrainConfig train_config_from(const json& cfg, bool* improved) {
    json t = section_or_empty(cfg, "train");
    reject_unknown(t, "train",
                   {"framework", "descriptor", "iterations", "batch_size",
                    "slice_size", "noise_side", "seed", "log_every",
                    "acf_max_lag", "adam", "bank"});
    TrainConfig tc;
    std::string fw = str_or(t, "train", "framework", "improved");
    if (fw != "basic" && fw != "improved")
        fail("train.framework", "expected 'basic' or 'improved'");
    *improved = fw == "improved";
    std::string desc = str_or(t, "train", "descriptor", "gram");
    if (desc == "gram")
        tc.descriptor = DescriptorKind::Gram;
    else if (desc == "acf")
        tc.descriptor = DescriptorKind::Acf;
    else
        fail("train.descriptor", "expected 'gram' or 'acf'");
    tc.iterations = static_cast<int>(int_or(t, "train", "iterations", 1000));
    tc.batch_size = static_cast<int>(int_or(t, "train", "batch_size", 1));
    tc.slice_size = static_cast<int>(int_or(t, "train", "slice_size", 0));
    tc.noise_side = static_cast<int>(int_or(t, "train", "noise_side", 0));
    tc.seed = static_cast<std::uint64_t>(int_or(t, "train", "seed", 1));
    tc.log_every = static_cast<int>(int_or(t, "train", "log_every", 100));
    tc.acf_max_lag = static_cast<int>(int_or(t, "train", "acf_max_lag", 20));
    json adam = section_or_empty(t, "adam");
    reject_unknown(adam, "train.adam", {"lr", "beta1", "beta2", "eps"});
    tc.adam.lr = num_or(adam, "train.adam", "lr", tc.adam.lr);
    tc.adam.beta1 = num_or(adam, "train.adam", "beta1", tc.adam.beta1);
    tc.adam.beta2 = num_or(adam, "train.adam", "beta2", tc.adam.beta2);
    tc.adam.eps = num_or(adam, "train.adam", "eps", tc.adam.eps);
    json bank = section_or_empty(t, "bank");
    reject_unknown(bank, "train.bank", {"widths", "layer_weights", "seed"});
    if (const json* j = find(bank, "widths"))
        tc.bank.widths = int_list(*j, "train.bank.widths");
    if (const json* j = find(bank, "layer_weights"))
        tc.bank.layer_weights = num_list(*j, "train.bank.layer_weights");
    tc.bank.seed = static_cast<std::uint64_t>(int_or(
        bank, "train.bank", "seed", static_cast<std::int64_t>(tc.bank.seed)));
    return tc;
}

int cmd_train(const json& cfg) {
    Inputs in = load_inputs(cfg);
    std::vector<std::string> warnings;
    NetworkSpec spec = spec_from_config(cfg, &in, &warnings);
    bool improved = true;
    TrainConfig tc = train_config_from(cfg, &improved);
    std::filesystem::path dir = out_dir(cfg);

    tc.log = &std::cout;
    auto [params, rep] = improved ? train_improved(in.refs, spec, tc)
                                  : train_basic(in.refs, spec, tc);

    save_model(params, (dir / "model.mm01").string());
    json report;
    report["framework"] = improved ? "improved" : "basic";
    report["descriptor"] =
        tc.descriptor == DescriptorKind::Gram ? "gram" : "acf";
    report["iterations"] = tc.iterations;
    report["batch_size"] = tc.batch_size;
    report["seed"] = tc.seed;
    report["slice_size"] = rep.slice_size;
    report["noise_side"] = rep.noise_side;
    report["reference_porosity"] = rep.reference_porosity;
    report["conv3_blocks"] = spec.conv3_blocks;
    report["channels"] = spec.channels;
    report["wall_time_s"] = rep.wall_time_s;
    report["initial_loss"] =
        rep.loss_series.empty() ? 0.0 : rep.loss_series.front();
    report["final_loss"] =
        rep.loss_series.empty() ? 0.0 : rep.loss_series.back();
    report["loss_series"] = rep.loss_series;
    for (const auto& w : rep.warnings) warnings.push_back(w);
    report["warnings"] = warnings;
    write_json(dir / "train_report.json", report);
    write_manifest(dir, "train", cfg, in.paths,
                   {dir / "model.mm01", dir / "train_report.json"});
    std::printf("trained %d iterations in %.1f s; loss %.6f -> %.6f\n",
                tc.iterations, rep.wall_time_s,
                report["initial_loss"].get<double>(),
                report["final_loss"].get<double>());
    for (const auto& w : warnings) std::printf("warning: %s\n", w.c_str());
    return 0;
}

// ------------------------------------------------------------- reconstruct ---

int cmd_reconstruct(const json& cfg) {
    json r = section_or_empty(cfg, "reconstruct");
    reject_unknown(r, "reconstruct",
                   {"model", "dims", "sub_block", "seed", "phi_target",
                    "binarize"});
    std::filesystem::path dir = out_dir(cfg);
    std::string model_path =
        str_or(r, "reconstruct", "model", (dir / "model.mm01").string());
    ModelParams params = load_model(model_path);

    ReconConfig rc;
    if (const json* j = find(r, "dims")) {
        std::vector<int> d = int_list(*j, "reconstruct.dims");
        if (d.size() != 3) fail("reconstruct.dims", "expected [z, y, x]");
        rc.dim_z = d[0];
        rc.dim_y = d[1];
        rc.dim_x = d[2];
    }
    if (const json* j = find(r, "sub_block")) {
        std::vector<int> d = int_list(*j, "reconstruct.sub_block");
        if (d.size() != 3) fail("reconstruct.sub_block", "expected [z, y, x]");
        rc.sub_z = d[0];
        rc.sub_y = d[1];
        rc.sub_x = d[2];
    } else {
        rc.sub_z = rc.dim_z;
        rc.sub_y = rc.dim_y;
        rc.sub_x = rc.dim_x;
    }
    rc.seed = static_cast<std::uint64_t>(int_or(r, "reconstruct", "seed", 0));
    std::string bin = str_or(r, "reconstruct", "binarize", "quantile");
    if (bin == "quantile")
        rc.method = BinarizeMethod::Quantile;
    else if (bin == "otsu")
        rc.method = BinarizeMethod::Otsu;
    else
        fail("reconstruct.binarize", "expected 'quantile' or 'otsu'");

    double default_phi = 0.5;
    if (const json* j = find(r, "phi_target")) {
        rc.phi_target = get_num(*j, "reconstruct.phi_target");
    } else {
        // Fall back to the porosity recorded at training time.
        std::ifstream trin(dir / "train_report.json");
        json tr = trin ? json::parse(trin, nullptr, false) : json();
        if (tr.is_object() && tr.contains("reference_porosity"))
            default_phi = tr["reference_porosity"].get<double>();
        else if (rc.method == BinarizeMethod::Quantile)
            fail("reconstruct.phi_target",
                 "required: no train_report.json with a reference porosity "
                 "found");
    }

    ReconResult res = reconstruct(params, rc, default_phi);
    save_volume(res.continuous, (dir / "recon_continuous.mv01").string());
    save_volume(res.binary, (dir / "recon_binary.mv01").string());
    json report;
    report["model"] = model_path;
    report["dims"] = {rc.dim_z, rc.dim_y, rc.dim_x};
    report["sub_block"] = {rc.sub_z, rc.sub_y, rc.sub_x};
    report["seed"] = rc.seed;
    report["binarize"] = bin;
    report["phi_target"] = rc.phi_target ? *rc.phi_target : default_phi;
    report["achieved_porosity"] = res.achieved_porosity;
    report["threshold"] = res.threshold;
    report["warnings"] = res.warnings;
    write_json(dir / "recon_report.json", report);
    write_manifest(dir, "reconstruct", cfg, {model_path},
                   {dir / "recon_continuous.mv01", dir / "recon_binary.mv01",
                    dir / "recon_report.json"});
    std::printf(
        "reconstructed %dx%dx%d volume, porosity %.4f (threshold %.6g)\n",
        rc.dim_z, rc.dim_y, rc.dim_x, res.achieved_porosity, res.threshold);
    for (const auto& w : res.warnings) std::printf("warning: %s\n", w.c_str());
    return 0;
}

// ---------------------------------------------------------------- evaluate ---

struct VolumeDescriptors {
    double phi = 0.0;
    DescriptorCurve s2, l, c2;
    PorosityHistogram lpd;
    CorrelationLength lcor;
};

VolumeDescriptors describe_volume(const Volume3D& v, int max_lag,
                                  int lpd_window, double lpd_bin,
                                  Connectivity conn, const json& design) {
    VolumeDescriptors d;
    d.phi = porosity(v).value;
    d.s2 = two_point_probability(v, max_lag);
    d.l = linear_path(v, max_lag);
    d.c2 = two_point_cluster(v, max_lag, conn);
    d.lpd = local_porosity_distribution(v, lpd_window, lpd_bin);
    d.lcor = autocorrelation_distance(
        d.s2, PhaseFraction{d.phi},
        num_or(design, "design", "lcor_eps_rel", 0.05),
        static_cast<int>(int_or(design, "design", "lcor_window", 3)));
    return d;
}

std::string lpd_csv(const PorosityHistogram& h) {
    std::string out = "bin_low,bin_high,probability\n";
    char buf[128];
    for (std::size_t i = 0; i + 1 < h.bin_edges.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g\n", h.bin_edges[i],
                      h.bin_edges[i + 1], h.probabilities[i]);
        out += buf;
    }
    return out;
}

int cmd_evaluate(const json& cfg) {
    json e = section_or_empty(cfg, "evaluate");
    reject_unknown(e, "evaluate",
                   {"volume", "truth", "max_lag", "lpd_window",
                    "lpd_bin_width", "connectivity"});
    json design = section_or_empty(cfg, "design");
    std::filesystem::path dir = out_dir(cfg);
    std::string vol_path =
        str_or(e, "evaluate", "volume", (dir / "recon_binary.mv01").string());
    Volume3D vol = load_volume(vol_path);
    if (vol.mode != VolumeMode::Binary)
        throw std::runtime_error("evaluate expects a binary volume");

    std::string conn_name = str_or(e, "evaluate", "connectivity", "face");
    Connectivity conn;
    if (conn_name == "face")
        conn = Connectivity::Face;
    else if (conn_name == "full")
        conn = Connectivity::Full;
    else
        fail("evaluate.connectivity", "expected 'face' or 'full'");
    int min_side = std::min({vol.dim_z, vol.dim_y, vol.dim_x});
    int max_lag = auto_max_lag(min_side, int_or(e, "evaluate", "max_lag", 20),
                               "evaluate.max_lag");
    int lpd_window = static_cast<int>(
        int_or(e, "evaluate", "lpd_window", std::min(20, min_side)));
    double lpd_bin = num_or(e, "evaluate", "lpd_bin_width", 0.02);

    VolumeDescriptors dv =
        describe_volume(vol, max_lag, lpd_window, lpd_bin, conn, design);
    std::vector<std::filesystem::path> outputs;
    std::vector<std::string> in_paths = {vol_path};
    write_text(dir / "eval_s2.csv", to_csv(dv.s2));
    write_text(dir / "eval_l.csv", to_csv(dv.l));
    write_text(dir / "eval_c2.csv", to_csv(dv.c2));
    write_text(dir / "eval_lpd.csv", lpd_csv(dv.lpd));
    for (const char* f :
         {"eval_s2.csv", "eval_l.csv", "eval_c2.csv", "eval_lpd.csv"})
        outputs.push_back(dir / f);

    json summary;
    summary["volume"] = vol_path;
    summary["porosity"] = dv.phi;
    summary["correlation_length"] = dv.lcor.l_cor;
    summary["correlation_length_converged"] = dv.lcor.converged;
    summary["max_lag"] = max_lag;
    summary["connectivity"] = conn_name;

    // Against the 2D reference image(s), when provided: compare mean curves.
    const json* input = find(cfg, "input");
    if (input && input->is_object() && !input->empty()) {
        Inputs in = load_inputs(cfg);
        for (const auto& p : in.paths) in_paths.push_back(p);
        std::size_t nrefs = in.refs.anisotropic ? 3 : 1;
        double phi_acc = 0.0;
        std::vector<double> s2_acc, l_acc;
        for (std::size_t k = 0; k < nrefs; ++k) {
            const Image2D& img = in.refs.images[k];
            phi_acc += porosity(img).value;
            int ref_lag =
                std::min(max_lag, std::min(img.width, img.height) - 1);
            DescriptorCurve rs2 = two_point_probability(img, ref_lag);
            DescriptorCurve rl = linear_path(img, ref_lag);
            if (s2_acc.empty()) {
                s2_acc = rs2.mean;
                l_acc = rl.mean;
            } else {
                for (std::size_t i = 0;
                     i < s2_acc.size() && i < rs2.mean.size(); ++i)
                    s2_acc[i] += rs2.mean[i];
                for (std::size_t i = 0; i < l_acc.size() && i < rl.mean.size();
                     ++i)
                    l_acc[i] += rl.mean[i];
            }
        }
        double nref = static_cast<double>(nrefs);
        for (double& x : s2_acc) x /= nref;
        for (double& x : l_acc) x /= nref;
        double ref_phi = phi_acc / nref;
        DescriptorCurve ref_s2_curve;
        ref_s2_curve.mean = s2_acc;
        for (std::size_t i = 0; i < s2_acc.size(); ++i)
            ref_s2_curve.lags.push_back(static_cast<int>(i));
        CorrelationLength ref_lcor = autocorrelation_distance(
            ref_s2_curve, PhaseFraction{ref_phi},
            num_or(design, "design", "lcor_eps_rel", 0.05),
            static_cast<int>(int_or(design, "design", "lcor_window", 3)));
        summary["reference"] = {
            {"porosity", ref_phi},
            {"correlation_length", ref_lcor.l_cor},
            {"correlation_length_converged", ref_lcor.converged},
            {"porosity_error", dv.phi - ref_phi},
            {"s2_mad", curve_mad(dv.s2.mean, s2_acc)},
            {"l_mad", curve_mad(dv.l.mean, l_acc)},
            {"correlation_length_error", dv.lcor.l_cor - ref_lcor.l_cor}};
    }

    // Against a ground-truth volume, when provided.
    if (const json* j = find(e, "truth")) {
        std::string truth_path = get_str(*j, "evaluate.truth");
        Volume3D truth = load_volume(truth_path);
        if (truth.mode != VolumeMode::Binary)
            throw std::runtime_error("evaluate expects a binary truth volume");
        in_paths.push_back(truth_path);
        int tmin = std::min({truth.dim_z, truth.dim_y, truth.dim_x});
        int tlag = std::min(max_lag, tmin - 1);
        VolumeDescriptors dt = describe_volume(
            truth, tlag, std::min(lpd_window, tmin), lpd_bin, conn, design);
        write_text(dir / "eval_s2_truth.csv", to_csv(dt.s2));
        write_text(dir / "eval_l_truth.csv", to_csv(dt.l));
        write_text(dir / "eval_c2_truth.csv", to_csv(dt.c2));
        write_text(dir / "eval_lpd_truth.csv", lpd_csv(dt.lpd));
        for (const char* f : {"eval_s2_truth.csv", "eval_l_truth.csv",
                              "eval_c2_truth.csv", "eval_lpd_truth.csv"})
            outputs.push_back(dir / f);
        summary["truth"] = {
            {"path", truth_path},
            {"porosity", dt.phi},
            {"porosity_error", dv.phi - dt.phi},
            {"s2_mad", curve_mad(dv.s2.mean, dt.s2.mean)},
            {"l_mad", curve_mad(dv.l.mean, dt.l.mean)},
            {"c2_mad", curve_mad(dv.c2.mean, dt.c2.mean)},
            {"lpd_mad", curve_mad(dv.lpd.probabilities, dt.lpd.probabilities)}};
    }

    write_json(dir / "eval_summary.json", summary);
    outputs.push_back(dir / "eval_summary.json");
    write_manifest(dir, "evaluate", cfg, in_paths, outputs);
    std::printf("evaluated %s: porosity %.4f, correlation length %d\n",
                vol_path.c_str(), dv.phi, dv.lcor.l_cor);
    if (summary.contains("reference"))
        std::printf("vs reference: s2 mad %.6f, l mad %.6f\n",
                    summary["reference"]["s2_mad"].get<double>(),
                    summary["reference"]["l_mad"].get<double>());
    if (summary.contains("truth"))
        std::printf("vs truth: s2 mad %.6f, l mad %.6f, c2 mad %.6f\n",
                    summary["truth"]["s2_mad"].get<double>(),
                    summary["truth"]["l_mad"].get<double>(),
                    summary["truth"]["c2_mad"].get<double>());
    return 0;
}

// --------------------------------------------------------------------- sa ---

int cmd_sa(const json& cfg) {
    Inputs in = load_inputs(cfg);
    if (in.refs.anisotropic)
        throw std::runtime_error("the annealing baseline uses a single reference");
    json s = section_or_empty(cfg, "sa");
    reject_unknown(s, "sa",
                   {"dims", "weight_s2", "weight_l", "max_lag", "t0",
                    "t0_factor", "cooling", "swaps_per_temp", "max_swaps",
                    "energy_stop", "seed"});
    AnnealConfig ac;
    if (const json* j = find(s, "dims")) ac.dims = int_list(*j, "sa.dims");
    ac.weight_s2 = num_or(s, "sa", "weight_s2", ac.weight_s2);
    ac.weight_l = num_or(s, "sa", "weight_l", ac.weight_l);
    ac.max_lag = static_cast<int>(int_or(s, "sa", "max_lag", ac.max_lag));
    if (const json* j = find(s, "t0")) ac.t0 = get_num(*j, "sa.t0");
    ac.t0_factor = num_or(s, "sa", "t0_factor", ac.t0_factor);
    ac.cooling = num_or(s, "sa", "cooling", ac.cooling);
    ac.swaps_per_temp = int_or(s, "sa", "swaps_per_temp", ac.swaps_per_temp);
    ac.max_swaps = int_or(s, "sa", "max_swaps", ac.max_swaps);
    ac.energy_stop = num_or(s, "sa", "energy_stop", ac.energy_stop);
    ac.seed = static_cast<std::uint64_t>(int_or(s, "sa", "seed", 0));

    std::filesystem::path dir = out_dir(cfg);
    AnnealResult res = anneal(in.refs.images[0], ac);
    std::vector<std::filesystem::path> outputs;
    if (res.is_3d) {
        save_volume(res.volume, (dir / "sa_result.mv01").string());
        outputs.push_back(dir / "sa_result.mv01");
    } else {
        save_image(res.image, (dir / "sa_result.pgm").string());
        outputs.push_back(dir / "sa_result.pgm");
    }
    write_text(dir / "sa_trace.csv", trace_csv(res.trace));
    outputs.push_back(dir / "sa_trace.csv");
    json report;
    report["dims"] = ac.dims;
    report["seed"] = ac.seed;
    report["initial_energy"] = res.initial_energy;
    report["final_energy"] = res.final_energy;
    report["best_energy"] = res.best_energy;
    report["swaps"] = res.trace.size();
    write_json(dir / "sa_report.json", report);
    outputs.push_back(dir / "sa_report.json");
    write_manifest(dir, "sa", cfg, in.paths, outputs);
    std::printf("annealing: energy %.6g -> best %.6g after %zu swaps\n",
                res.initial_energy, res.best_energy, res.trace.size());
    return 0;
}

}  // namespace

int run(const Options& opts) {
    try {
        json cfg = load_config(opts);
        if (opts.command == "analyze") return cmd_analyze(cfg);
        if (opts.command == "design") return cmd_design(cfg);
        if (opts.command == "train") return cmd_train(cfg);
        if (opts.command == "reconstruct") return cmd_reconstruct(cfg);
        if (opts.command == "evaluate") return cmd_evaluate(cfg);
        if (opts.command == "sa") return cmd_sa(cfg);
        throw ConfigError("unknown command '" + opts.command + "'");
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}

}  // namespace porerec::cli
