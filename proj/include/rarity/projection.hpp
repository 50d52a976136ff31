#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rarity/core.hpp"

namespace rarity {

/// Zero-mean, unit-norm random weights over a shape's support, in the
/// shape's canonical order.
struct ProjectionOperator {
    std::vector<double> values;
    std::uint64_t seed = 0;
};

/// Centered and normalized i.i.d. standard normals: uniform on the unit
/// sphere within the zero-sum hyperplane. Deterministic in (shape, seed).
ProjectionOperator sample_operator(const Shape& shape, std::uint64_t seed);

/// Seed for pass `pass` derived from a master seed (splitmix64 mix).
std::uint64_t pass_seed(std::uint64_t master, std::size_t pass);

enum class ConvolutionMethod { Auto, Direct, Fft };

/// Support size at or below which Auto picks the spatial-domain path.
inline constexpr std::size_t kDirectCrossover = 64;

ConvolutionMethod parse_method(const std::string& name);

/// C(r) = X . A_S(r) for every valid origin, plus the population standard
/// deviation of those values.
struct ProjectionField {
    OriginRegion region{0, 0};
    std::vector<double> values;
    double sigma = 0.0;
    std::uint64_t seed = 0;  ///< seed of the operator that produced it

    double at(Origin r) const { return values[region.index(r)]; }
};

/// Population standard deviation (two-pass, fixed summation order).
double standard_deviation(std::span<const double> values);

/// Reusable projector for one (image, shape) pair. Caches the image
/// spectrum so that each additional operator costs one forward and one
/// inverse transform. project() is safe to call concurrently.
class Projector {
public:
    Projector(const Image& image, const Shape& shape,
              ConvolutionMethod method = ConvolutionMethod::Auto);
    ~Projector();
    Projector(const Projector&) = delete;
    Projector& operator=(const Projector&) = delete;

    ProjectionField project(const ProjectionOperator& op) const;

    const OriginRegion& region() const { return region_; }
    ConvolutionMethod method() const { return method_; }

private:
    ProjectionField project_direct(const ProjectionOperator& op) const;
    ProjectionField project_fft(const ProjectionOperator& op) const;

    struct FftState;

    Image centered_;
    Shape shape_;
    OriginRegion region_;
    ConvolutionMethod method_;
    std::unique_ptr<FftState> fft_;
};

/// Cross-correlates `image` with `op` over the origin region. Throws
/// GeometryError if the shape does not fit the image.
ProjectionField project_all(const Image& image, const Shape& shape, const ProjectionOperator& op,
                            ConvolutionMethod method = ConvolutionMethod::Auto);

enum class ScoreMode { Count, Smoothed };

ScoreMode parse_mode(const std::string& name);
std::string to_string(ScoreMode mode);

struct ScoringParams {
    int passes = 30;  ///< M
    double a = 12.0;  ///< threshold multiplier on sigma_X
    std::uint64_t seed = 0;
    ScoreMode mode = ScoreMode::Count;
    bool normalize_by_block_dev = false;
    ConvolutionMethod method = ConvolutionMethod::Auto;
    /// Worker count, 0 = hardware concurrency. Does not affect results.
    unsigned threads = 1;
};

/// Default threshold multiplier for a block side: 3 up to side 8, 12 from
/// side 24, linear in between.
double default_threshold(int side);

struct PassStats {
    std::uint64_t seed = 0;
    double sigma = 0.0;
    std::size_t exceedances = 0;  ///< origins with |C| > a * sigma
};

struct ScoreMap {
    OriginRegion region{0, 0};
    std::vector<double> values;
    ScoreMode mode = ScoreMode::Count;
    int passes = 0;
    std::vector<PassStats> pass_stats;

    double at(Origin r) const { return values[region.index(r)]; }
    /// Row-major first maximum.
    Origin argmax() const;
};

/// Standard deviation of each block A_S(r) over the shape support.
std::vector<double> block_deviations(const Image& image, const Shape& shape);

/// The M projection fields used by the scoring pass, in pass order. With
/// normalize_by_block_dev each value is divided by its block's deviation
/// (zero-deviation blocks are set to 0 and excluded from sigma).
std::vector<ProjectionField> compute_fields(const Image& image, const Shape& shape,
                                            const ScoringParams& params);

/// Accumulates one pass into a score map.
void accumulate_pass(ScoreMap& map, const ProjectionField& field, double a);

/// Thresholded random-projection scoring. Count mode stores, for each
/// origin, the number of passes with |C_i(r)| > a * sigma_i; smoothed mode
/// sums smoothed_penalty(C_i(r), sigma_i). Bit-identical for any thread
/// count.
ScoreMap score_image(const Image& image, const Shape& shape, const ScoringParams& params);

/// 1/2 + x^2 / (2 sigma^2). Throws std::invalid_argument if sigma <= 0.
double smoothed_penalty(double x, double sigma);

struct Candidate {
    Origin origin;
    double score = 0.0;
};

/// Greedy non-overlapping selection of the highest-scoring origins, ties
/// broken row-major.
std::vector<Candidate> top_candidates(const ScoreMap& map, std::size_t k, const Shape& shape,
                                      SeparationRule rule = SeparationRule::Chebyshev);

/// Candidate selection over an arbitrary per-origin value array.
std::vector<Candidate> top_candidates(const OriginRegion& region, std::span<const double> values,
                                      std::size_t k, const Shape& shape,
                                      SeparationRule rule = SeparationRule::Chebyshev);

/// Bin index for x in `bins` equal-width bins over [-half_range, half_range].
/// Out-of-range values clamp to the edge bins; half_range == 0 maps to the
/// center bin.
std::size_t symmetric_bin(double x, double half_range, std::size_t bins);

struct Moments {
    double mean = 0.0;
    double sd = 0.0;
    double excess_kurtosis = 0.0;
};

Moments compute_moments(std::span<const double> values);

struct Histogram {
    double half_range = 0.0;
    std::vector<double> centers;
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;
    Moments moments;

    /// Natural-log empirical probability; -inf for empty bins.
    double log_probability(std::size_t bin) const;
};

/// Builds a symmetric histogram over the given values.
Histogram make_histogram(std::span<const double> values, std::size_t bins);

/// Pools the values of M projection fields into one histogram. Throws
/// std::invalid_argument if bins < 2 or passes < 1.
Histogram projection_histogram(const Image& image, const Shape& shape, int passes,
                               std::size_t bins, std::uint64_t seed,
                               ConvolutionMethod method = ConvolutionMethod::Auto,
                               unsigned threads = 1);

}  // namespace rarity
