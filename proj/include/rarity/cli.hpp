#pragma once

// Command implementations behind the `rarity` executable. Each returns a
// process exit code; see ExitCode.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>

#include "json.hpp"

namespace rarity::cli {

enum ExitCode : int {
    kOk = 0,
    kInputError = 2,
    kGeometryError = 3,
    kCostGuard = 4,
};

inline constexpr int kReportSchemaVersion = 1;

struct CommonOptions {
    std::string input;
    int shape_side = 24;
    std::string mask;  ///< overrides shape_side when set
    std::string out_prefix = "rarity";
    std::string separation = "chebyshev";
    bool png = false;  ///< heatmaps as PNG instead of PGM
    unsigned threads = 1;
};

struct ScoreOptions : CommonOptions {
    int passes = 30;
    std::optional<double> a;  ///< unset: default_threshold(shape side)
    std::string mode = "count";
    std::uint64_t seed = 0;
    bool normalize_by_block_dev = false;
    std::string method = "auto";
    std::size_t top = 5;
};

struct OracleCliOptions : CommonOptions {
    std::string norm = "l2";
    bool force = false;
    double z = 3.0;
    std::size_t max_origins = 100000;
};

struct NetworkCliOptions : ScoreOptions {
    double fraction = 0.02;
    std::optional<double> beta;
    std::optional<double> h0;
    double delta = std::numeric_limits<double>::infinity();
    int max_iters = 50;
    double tol = 1e-4;
    std::size_t weight_cap = 64;
};

struct HistogramOptions : CommonOptions {
    int passes = 30;
    std::size_t bins = 257;
    std::uint64_t seed = 0;
    std::string method = "auto";
};

struct SynthOptions {
    std::string spec_path;
    std::string output;  ///< .png writes PNG, anything else 16-bit PGM
};

int cmd_score(const ScoreOptions& opt, std::ostream& log);
int cmd_oracle(const OracleCliOptions& opt, std::ostream& log);
int cmd_network(const NetworkCliOptions& opt, std::ostream& log);
int cmd_histogram(const HistogramOptions& opt, std::ostream& log);
int cmd_synth(const SynthOptions& opt, std::ostream& log);

/// Report with the schedule-dependent "runtime" section removed.
nlohmann::json comparable_report(nlohmann::json report);

}  // namespace rarity::cli
