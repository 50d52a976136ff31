#include <iostream>

#include "CLI11.hpp"
#include "rarity/cli.hpp"

namespace {

void add_common(CLI::App* cmd, rarity::cli::CommonOptions& opt) {
    cmd->add_option("input", opt.input, "Input image (PGM P5 or grayscale PNG)")->required();
    auto* side = cmd->add_option("--shape", opt.shape_side, "Side of the square shape in pixels");
    cmd->add_option("--mask", opt.mask, "Shape mask image; nonzero pixels are support")->excludes(side);
    cmd->add_option("-o,--out", opt.out_prefix, "Output path prefix");
    cmd->add_option("--separation", opt.separation, "Placement separation rule")
        ->check(CLI::IsMember({"chebyshev", "euclidean"}));
    cmd->add_flag("--png", opt.png, "Write heatmaps as PNG instead of PGM");
    cmd->add_option("--threads", opt.threads, "Worker threads (0 = all cores); results do not depend on it");
}

void add_scoring(CLI::App* cmd, rarity::cli::ScoreOptions& opt) {
    cmd->add_option("-M,--passes", opt.passes, "Number of random projections");
    cmd->add_option("-a,--a", opt.a, "Threshold multiplier on the projection deviation");
    cmd->add_option("--mode", opt.mode, "Scoring mode")->check(CLI::IsMember({"count", "smoothed"}));
    cmd->add_option("--seed", opt.seed, "Master random seed");
    cmd->add_flag("--normalize-block-dev", opt.normalize_by_block_dev,
                  "Divide projections by the deviation of each block");
    cmd->add_option("--method", opt.method, "Projection method")
        ->check(CLI::IsMember({"auto", "direct", "fft"}));
    cmd->add_option("--top", opt.top, "Number of candidates to report");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Locate the most unusual part of a grayscale image"};
    app.require_subcommand(1);

    rarity::cli::ScoreOptions score;
    auto* score_cmd = app.add_subcommand("score", "Random-projection rarity scores");
    add_common(score_cmd, score);
    add_scoring(score_cmd, score);

    rarity::cli::OracleCliOptions oracle;
    auto* oracle_cmd = app.add_subcommand("oracle", "Exact nearest-disjoint-neighbour search");
    add_common(oracle_cmd, oracle);
    oracle_cmd->add_option("--norm", oracle.norm, "Block distance norm")->check(CLI::IsMember({"l2", "l1"}));
    oracle_cmd->add_option("--z", oracle.z, "Outlier threshold in standard deviations");
    oracle_cmd->add_option("--max-origins", oracle.max_origins, "Cost guard on the number of origins");
    oracle_cmd->add_flag("--force", oracle.force, "Run even when the cost guard trips");

    rarity::cli::NetworkCliOptions network;
    auto* network_cmd = app.add_subcommand("network", "Score, then refine with the inhibitory network");
    add_common(network_cmd, network);
    add_scoring(network_cmd, network);
    network_cmd->add_option("-f,--fraction", network.fraction, "Target fraction of active neurons");
    network_cmd->add_option("--beta", network.beta, "Inverse temperature (default 10 / stddev of the field)");
    network_cmd->add_option("--h0", network.h0, "Field scale (default: flux balance)");
    network_cmd->add_option("--delta", network.delta, "Projection similarity window (default infinite)");
    network_cmd->add_option("--max-iters", network.max_iters, "Dynamics iteration limit");
    network_cmd->add_option("--tol", network.tol, "Convergence tolerance");
    network_cmd->add_option("--weight-cap", network.weight_cap, "Partners kept per origin (0 = all)");

    rarity::cli::HistogramOptions histogram;
    auto* histogram_cmd = app.add_subcommand("histogram", "Distribution of projection values");
    add_common(histogram_cmd, histogram);
    histogram_cmd->add_option("-M,--passes", histogram.passes, "Number of random projections");
    histogram_cmd->add_option("--bins", histogram.bins, "Number of histogram bins");
    histogram_cmd->add_option("--seed", histogram.seed, "Master random seed");
    histogram_cmd->add_option("--method", histogram.method, "Projection method")
        ->check(CLI::IsMember({"auto", "direct", "fft"}));

    rarity::cli::SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic image with planted patches");
    synth_cmd->add_option("spec", synth.spec_path, "JSON spec")->required();
    synth_cmd->add_option("output", synth.output, "Output image (.pgm or .png)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : rarity::cli::kInputError;
    }

    if (*score_cmd) return rarity::cli::cmd_score(score, std::cerr);
    if (*oracle_cmd) return rarity::cli::cmd_oracle(oracle, std::cerr);
    if (*network_cmd) return rarity::cli::cmd_network(network, std::cerr);
    if (*histogram_cmd) return rarity::cli::cmd_histogram(histogram, std::cerr);
    return rarity::cli::cmd_synth(synth, std::cerr);
}
