#include "rarity/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "rarity/core.hpp"
#include "rarity/io.hpp"
#include "rarity/network.hpp"
#include "rarity/oracle.hpp"
#include "rarity/projection.hpp"
#include "rarity/synth.hpp"

namespace rarity::cli {

using nlohmann::json;

namespace {

class Stopwatch {
public:
    double lap_ms() {
        const auto now = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
        last_ = now;
        return ms;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

Shape load_shape(const CommonOptions& opt) {
    if (!opt.mask.empty()) return io::read_mask(opt.mask);
    if (opt.shape_side < 2) throw std::invalid_argument("--shape must be at least 2");
    return Shape::square(opt.shape_side);
}

json shape_json(const Shape& s, const CommonOptions& opt) {
    return {{"width", s.width()},
            {"height", s.height()},
            {"support_size", s.support_size()},
            {"source", opt.mask.empty() ? "square" : "mask"}};
}

json input_json(const CommonOptions& opt, const Image& image) {
    return {{"path", opt.input}, {"width", image.width()}, {"height", image.height()}};
}

json origin_json(Origin r) { return {{"x", r.x}, {"y", r.y}}; }

json number_or_string(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return nullptr;
    return v > 0 ? "inf" : "-inf";
}

std::string write_heatmap(const std::string& stem, std::span<const double> values,
                          const OriginRegion& region, bool png) {
    const auto raster = io::render_heatmap(values, region.width, region.height);
    const std::string path = stem + (png ? ".png" : ".pgm");
    if (png) {
        io::write_png(path, raster);
    } else {
        io::write_pgm(path, raster);
    }
    io::write_raw_map(stem + ".f64", values, region.width, region.height);
    return path;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json candidates_json(const std::vector<Candidate>& cands) {
    json out = json::array();
    for (std::size_t i = 0; i < cands.size(); ++i) {
        out.push_back({{"rank", i + 1}, {"origin", origin_json(cands[i].origin)}, {"score", cands[i].score}});
    }
    return out;
}

void write_candidates_csv(const std::string& path, const std::vector<Candidate>& cands) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << "rank,x,y,score\n";
    for (std::size_t i = 0; i < cands.size(); ++i) {
        out << i + 1 << ',' << cands[i].origin.x << ',' << cands[i].origin.y << ','
            << format_double(cands[i].score) << '\n';
    }
}

ScoringParams scoring_params(const ScoreOptions& opt, const Shape& shape) {
    ScoringParams p;
    p.passes = opt.passes;
    p.a = opt.a.value_or(default_threshold(shape.side()));
    p.seed = opt.seed;
    p.mode = parse_mode(opt.mode);
    p.normalize_by_block_dev = opt.normalize_by_block_dev;
    p.method = parse_method(opt.method);
    p.threads = opt.threads;
    return p;
}

json scoring_json(const ScoringParams& p, const ScoreOptions& opt) {
    return {{"passes", p.passes},
            {"a", p.a},
            {"seed", p.seed},
            {"mode", to_string(p.mode)},
            {"normalize_by_block_dev", p.normalize_by_block_dev},
            {"method", opt.method},
            {"separation", opt.separation},
            {"top", opt.top}};
}

json pass_stats_json(const ScoreMap& map) {
    json out = json::array();
    for (const auto& s : map.pass_stats) {
        out.push_back({{"seed", s.seed}, {"sigma", s.sigma}, {"exceedances", s.exceedances}});
    }
    return out;
}

json moments_json(const Moments& m) {
    return {{"mean", m.mean}, {"sd", m.sd}, {"excess_kurtosis", m.excess_kurtosis}};
}

json runtime_json(unsigned threads, const json& timings) {
    return {{"threads", threads}, {"timings_ms", timings}};
}

template <typename Fn>
int guarded(std::ostream& log, Fn&& body) {
    try {
        return body();
    } catch (const GeometryError& e) {
        log << "geometry error: " << e.what() << '\n';
        return kGeometryError;
    } catch (const InputError& e) {
        log << "input error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::invalid_argument& e) {
        log << "invalid argument: " << e.what() << '\n';
        return kInputError;
    }
}

void require_fit(const Image& image, const Shape& shape) {
    if (OriginRegion(image, shape).empty()) {
        throw GeometryError("shape " + std::to_string(shape.width()) + "x" +
                            std::to_string(shape.height()) + " is larger than image " +
                            std::to_string(image.width()) + "x" + std::to_string(image.height()));
    }
}

}  // namespace

json comparable_report(json report) {
    report.erase("runtime");
    return report;
}

int cmd_score(const ScoreOptions& opt, std::ostream& log) {
    return guarded(log, [&] {
        Stopwatch clock;
        json timings;
        const Image image = io::read_image(opt.input);
        const Shape shape = load_shape(opt);
        require_fit(image, shape);
        const SeparationRule rule = parse_separation(opt.separation);
        const ScoringParams params = scoring_params(opt, shape);
        timings["load"] = clock.lap_ms();

        const ScoreMap map = score_image(image, shape, params);
        timings["score"] = clock.lap_ms();
        const auto cands = top_candidates(map, std::max<std::size_t>(opt.top, 1), shape, rule);

        const std::string heatmap = write_heatmap(opt.out_prefix + ".score", map.values, map.region, opt.png);
        write_candidates_csv(opt.out_prefix + ".candidates.csv", cands);
        timings["write"] = clock.lap_ms();

        json report;
        report["schema_version"] = kReportSchemaVersion;
        report["command"] = "score";
        report["input"] = input_json(opt, image);
        report["shape"] = shape_json(shape, opt);
        report["parameters"] = scoring_json(params, opt);
        report["results"] = {{"origin_region", {{"width", map.region.width}, {"height", map.region.height}}},
                             {"candidates", candidates_json(cands)},
                             {"passes", pass_stats_json(map)},
                             {"outputs", {{"heatmap", heatmap},
                                          {"raw", opt.out_prefix + ".score.f64"},
                                          {"candidates", opt.out_prefix + ".candidates.csv"}}}};
        report["runtime"] = runtime_json(opt.threads, timings);
        write_json(opt.out_prefix + ".report.json", report);
        log << "top candidate at (" << cands.front().origin.x << ", " << cands.front().origin.y
            << ") score " << cands.front().score << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_oracle(const OracleCliOptions& opt, std::ostream& log) {
    return guarded(log, [&] {
        Stopwatch clock;
        json timings;
        const Image image = io::read_image(opt.input);
        const Shape shape = load_shape(opt);
        require_fit(image, shape);
        OracleOptions o;
        o.norm = parse_norm(opt.norm);
        o.rule = parse_separation(opt.separation);
        o.threads = opt.threads;
        const OriginRegion region(image, shape);
        if (region.count() > opt.max_origins && !opt.force) {
            const double n = static_cast<double>(region.count());
            log << "refusing exhaustive search over " << region.count() << " origins (limit "
                << opt.max_origins << "): about " << n * n * shape.support_size()
                << " pixel comparisons; pass --force to run anyway\n";
            return static_cast<int>(kCostGuard);
        }
        timings["load"] = clock.lap_ms();
        const DistanceMap map = nn_distance_map(image, shape, o);
        timings["search"] = clock.lap_ms();
        const RarestBlock best = rarest_block(map);
        const auto outliers = distance_outliers(map, opt.z, shape, o.rule);
        const std::string heatmap = write_heatmap(opt.out_prefix + ".distance", map.values, map.region, opt.png);
        timings["write"] = clock.lap_ms();

        json out_list = json::array();
        for (const auto& ol : outliers) {
            out_list.push_back({{"origin", origin_json(ol.origin)}, {"distance", ol.distance}, {"z_score", ol.z_score}});
        }
        json report;
        report["schema_version"] = kReportSchemaVersion;
        report["command"] = "oracle";
        report["input"] = input_json(opt, image);
        report["shape"] = shape_json(shape, opt);
        report["parameters"] = {{"norm", opt.norm}, {"separation", opt.separation}, {"z", opt.z}};
        report["results"] = {{"rarest", {{"origin", origin_json(best.origin)}, {"distance", best.distance}}},
                             {"outliers", out_list},
                             {"outputs", {{"heatmap", heatmap}, {"raw", opt.out_prefix + ".distance.f64"}}}};
        report["runtime"] = runtime_json(opt.threads, timings);
        write_json(opt.out_prefix + ".report.json", report);
        log << "rarest block at (" << best.origin.x << ", " << best.origin.y << ") distance "
            << best.distance << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_network(const NetworkCliOptions& opt, std::ostream& log) {
    return guarded(log, [&] {
        Stopwatch clock;
        json timings;
        const Image image = io::read_image(opt.input);
        const Shape shape = load_shape(opt);
        require_fit(image, shape);
        const SeparationRule rule = parse_separation(opt.separation);
        const ScoringParams scoring = scoring_params(opt, shape);
        if (scoring.passes < 1) throw std::invalid_argument("network needs at least one pass");
        timings["load"] = clock.lap_ms();

        const auto fields = compute_fields(image, shape, scoring);
        ScoreMap map;
        map.region = fields.front().region;
        map.values.assign(map.region.count(), 0.0);
        map.mode = scoring.mode;
        for (const auto& f : fields) accumulate_pass(map, f, scoring.a);
        timings["score"] = clock.lap_ms();

        NetworkParams np;
        np.h0 = opt.h0;
        np.delta = opt.delta;
        np.a = scoring.a;
        np.beta = opt.beta;
        np.target_fraction = opt.fraction;
        np.max_iters = opt.max_iters;
        np.tol = opt.tol;
        np.weight_cap = opt.weight_cap;
        np.rule = rule;
        np.threads = opt.threads;
        const NetworkResult net = run_network(fields, shape, np);
        timings["network"] = clock.lap_ms();

        const std::string score_path = write_heatmap(opt.out_prefix + ".score", map.values, map.region, opt.png);
        const std::string activity_path =
            write_heatmap(opt.out_prefix + ".activity", net.activity, net.region, opt.png);
        const std::size_t k = std::max<std::size_t>(opt.top, 1);
        const auto score_cands = top_candidates(map, k, shape, rule);
        const auto activity_cands = top_candidates(net.region, net.activity, k, shape, rule);
        write_candidates_csv(opt.out_prefix + ".candidates.csv", activity_cands);
        timings["write"] = clock.lap_ms();

        std::vector<double> pooled;
        for (const auto& f : fields) pooled.insert(pooled.end(), f.values.begin(), f.values.end());

        json params = scoring_json(scoring, opt);
        params["fraction"] = opt.fraction;
        params["beta"] = opt.beta ? json(*opt.beta) : json("auto");
        params["h0"] = opt.h0 ? json(*opt.h0) : json("auto");
        params["delta"] = number_or_string(opt.delta);
        params["max_iters"] = opt.max_iters;
        params["tol"] = opt.tol;
        params["weight_cap"] = opt.weight_cap;

        json report;
        report["schema_version"] = kReportSchemaVersion;
        report["command"] = "network";
        report["input"] = input_json(opt, image);
        report["shape"] = shape_json(shape, opt);
        report["parameters"] = params;
        report["results"] = {
            {"score_candidates", candidates_json(score_cands)},
            {"activity_candidates", candidates_json(activity_cands)},
            {"histogram", moments_json(compute_moments(pooled))},
            {"network", {{"h0", net.h0},
                         {"beta", net.beta},
                         {"threshold", net.calibration.threshold},
                         {"active_fraction", active_fraction(net.activity)},
                         {"calibrated_fraction", net.calibration.fraction},
                         {"calibration_within_tolerance", net.calibration.within_tolerance},
                         {"calibration_bracketed", net.calibration.bracketed},
                         {"weight_pairs", net.weights.pairs()},
                         {"convergence", to_string(net.status)},
                         {"iterations", net.iterations}}},
            {"outputs", {{"score_heatmap", score_path},
                         {"score_raw", opt.out_prefix + ".score.f64"},
                         {"activity_heatmap", activity_path},
                         {"activity_raw", opt.out_prefix + ".activity.f64"},
                         {"candidates", opt.out_prefix + ".candidates.csv"}}}};
        report["runtime"] = runtime_json(opt.threads, timings);
        write_json(opt.out_prefix + ".report.json", report);
        log << "network " << to_string(net.status) << " after " << net.iterations
            << " iterations; top activity at (" << activity_cands.front().origin.x << ", "
            << activity_cands.front().origin.y << ")\n";
        return static_cast<int>(kOk);
    });
}

int cmd_histogram(const HistogramOptions& opt, std::ostream& log) {
    return guarded(log, [&] {
        Stopwatch clock;
        json timings;
        const Image image = io::read_image(opt.input);
        const Shape shape = load_shape(opt);
        require_fit(image, shape);
        timings["load"] = clock.lap_ms();
        const Histogram h = projection_histogram(image, shape, opt.passes, opt.bins, opt.seed,
                                                 parse_method(opt.method), opt.threads);
        timings["histogram"] = clock.lap_ms();

        const std::string csv = opt.out_prefix + ".histogram.csv";
        std::ofstream out(csv, std::ios::binary);
        if (!out) throw InputError("cannot write '" + csv + "'");
        out << "bin_center,count,log10_probability\n";
        for (std::size_t i = 0; i < h.counts.size(); ++i) {
            out << format_double(h.centers[i]) << ',' << h.counts[i] << ','
                << format_double(h.log_probability(i) / std::log(10.0)) << '\n';
        }
        out.close();
        timings["write"] = clock.lap_ms();

        json report;
        report["schema_version"] = kReportSchemaVersion;
        report["command"] = "histogram";
        report["input"] = input_json(opt, image);
        report["shape"] = shape_json(shape, opt);
        report["parameters"] = {{"passes", opt.passes}, {"bins", opt.bins}, {"seed", opt.seed}, {"method", opt.method}};
        report["results"] = {{"total", h.total},
                             {"half_range", h.half_range},
                             {"moments", moments_json(h.moments)},
                             {"outputs", {{"csv", csv}}}};
        report["runtime"] = runtime_json(opt.threads, timings);
        write_json(opt.out_prefix + ".report.json", report);
        log << "pooled " << h.total << " projection values, excess kurtosis "
            << h.moments.excess_kurtosis << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_synth(const SynthOptions& opt, std::ostream& log) {
    return guarded(log, [&] {
        std::ifstream in(opt.spec_path, std::ios::binary);
        if (!in) throw InputError("cannot open '" + opt.spec_path + "'");
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw InputError(opt.spec_path + ": " + e.what());
        }
        const synth::SynthSpec spec = synth::spec_from_json(j);
        const synth::Generated g = synth::generate(spec);

        io::GrayRaster r;
        r.width = g.image.width();
        r.height = g.image.height();
        r.maxval = 65535;
        r.pixels.resize(g.image.size());
        for (std::size_t i = 0; i < r.pixels.size(); ++i) {
            const double v = std::clamp(g.image.data()[i], 0.0, 1.0);
            r.pixels[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        }
        const bool png = opt.output.size() >= 4 && opt.output.substr(opt.output.size() - 4) == ".png";
        if (png) {
            io::write_png(opt.output, r);
        } else {
            io::write_pgm(opt.output, r);
        }
        json truth;
        truth["schema_version"] = kReportSchemaVersion;
        truth["image"] = opt.output;
        truth["spec"] = synth::spec_to_json(spec);
        truth["plants"] = json::array();
        for (std::size_t i = 0; i < g.truth.size(); ++i) {
            truth["plants"].push_back({{"origin", origin_json(g.truth[i])},
                                       {"width", spec.plants[i].width},
                                       {"height", spec.plants[i].height}});
        }
        write_json(opt.output + ".truth.json", truth);
        log << "wrote " << opt.output << " with " << g.truth.size() << " planted patch(es)\n";
        return static_cast<int>(kOk);
    });
}

}  // namespace rarity::cli
