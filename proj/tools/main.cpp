#include <string>
#include <vector>

#include "CLI11.hpp"
#include "porerec/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{
        "Reconstructs 3D binary porous microstructures from a 2D reference "
        "image with a small fully-convolutional network, and evaluates them "
        "with statistical descriptors."};
    app.set_version_flag("--version", porerec::cli::kVersion);
    app.require_subcommand(1);

    porerec::cli::Options opts;
    std::string config_path, out_dir;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "JSON run configuration");
        sub->add_option("-o,--out", out_dir, "output directory (overrides output.dir)");
        sub->add_option("--seed", seed, "seed override for every stage");
        sub->add_option("--set", opts.sets,
                        "dotted config override, e.g. train.iterations=50");
    };

    add_common(app.add_subcommand(
        "analyze", "porosity, S2 curve and correlation length of a reference"));
    add_common(app.add_subcommand(
        "design", "derive the network depth from the correlation length"));
    add_common(app.add_subcommand("train", "fit a model to the reference(s)"));
    add_common(app.add_subcommand("reconstruct",
                                  "synthesize a volume from a trained model"));
    add_common(app.add_subcommand(
        "evaluate", "descriptor curves and deviations of a binary volume"));
    add_common(app.add_subcommand(
        "sa", "classical annealing baseline on the same descriptors"));

    CLI11_PARSE(app, argc, argv);

    CLI::App* sub = app.get_subcommands().front();
    opts.command = sub->get_name();
    if (sub->count("--config")) opts.config_path = config_path;
    if (sub->count("--out")) opts.out_dir = out_dir;
    if (sub->count("--seed")) opts.seed = seed;
    return porerec::cli::run(opts);
}
