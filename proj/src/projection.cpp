#include "rarity/projection.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>

#include "rarity/parallel.hpp"

namespace rarity {

namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::uint64_t splitmix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

bool is_smooth(int n) {
    for (int p : {2, 3, 5, 7}) {
        while (n % p == 0) n /= p;
    }
    return n == 1;
}

int good_fft_size(int n) {
    while (!is_smooth(n)) ++n;
    return n;
}

template <typename T>
struct FftwDeleter {
    void operator()(T* p) const { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter<T>>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
    if (p == nullptr) throw std::bad_alloc();
    return FftwBuffer<T>(p);
}

}  // namespace

std::uint64_t pass_seed(std::uint64_t master, std::size_t pass) {
    return splitmix64(master + (static_cast<std::uint64_t>(pass) + 1) * 0x9E3779B97F4A7C15ULL);
}

ProjectionOperator sample_operator(const Shape& shape, std::uint64_t seed) {
    const std::size_t n = shape.support_size();
    if (n < 2) throw std::invalid_argument("operator support must contain at least two pixels");
    ProjectionOperator op;
    op.seed = seed;
    op.values.resize(n);
    for (std::uint64_t attempt = 0;; ++attempt) {
        std::mt19937_64 rng(attempt == 0 ? seed : pass_seed(seed, attempt));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (double& v : op.values) v = normal(rng);
        const double mean = std::accumulate(op.values.begin(), op.values.end(), 0.0) / n;
        double norm2 = 0.0;
        for (double& v : op.values) {
            v -= mean;
            norm2 += v * v;
        }
        const double norm = std::sqrt(norm2);
        if (!(norm > 0.0) || !std::isfinite(norm)) continue;
        for (double& v : op.values) v /= norm;
        return op;
    }
}

ConvolutionMethod parse_method(const std::string& name) {
    if (name == "auto") return ConvolutionMethod::Auto;
    if (name == "direct") return ConvolutionMethod::Direct;
    if (name == "fft") return ConvolutionMethod::Fft;
    throw std::invalid_argument("unknown convolution method '" + name + "'");
}

double standard_deviation(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size()));
}

struct Projector::FftState {
    int px = 0;
    int py = 0;
    int nc = 0;
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
    FftwBuffer<fftw_complex> image_spectrum;

    std::size_t real_size() const { return static_cast<std::size_t>(px) * py; }
    std::size_t complex_size() const { return static_cast<std::size_t>(py) * nc; }

    ~FftState() {
        std::lock_guard lock(planner_mutex());
        if (forward) fftw_destroy_plan(forward);
        if (backward) fftw_destroy_plan(backward);
    }
};

Projector::Projector(const Image& image, const Shape& shape, ConvolutionMethod method)
    : centered_(image), shape_(shape), region_(image, shape), method_(method) {
    if (region_.empty()) {
        throw GeometryError("shape " + std::to_string(shape.width()) + "x" +
                            std::to_string(shape.height()) + " does not fit image " +
                            std::to_string(image.width()) + "x" + std::to_string(image.height()));
    }
    if (method_ == ConvolutionMethod::Auto) {
        method_ = shape.support_size() <= kDirectCrossover ? ConvolutionMethod::Direct
                                                           : ConvolutionMethod::Fft;
    }
    // Operators sum to zero, so removing the mean leaves every projection
    // unchanged while keeping the transforms well conditioned.
    auto data = centered_.data();
    const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
    // A flat image must project to exactly zero; its rounded mean may not
    // equal the pixel value.
    const double mean = *lo == *hi ? *lo : std::accumulate(data.begin(), data.end(), 0.0) / data.size();
    for (double& v : data) v -= mean;

    if (method_ != ConvolutionMethod::Fft) return;

    fft_ = std::make_unique<FftState>();
    fft_->px = good_fft_size(image.width());
    fft_->py = good_fft_size(image.height());
    fft_->nc = fft_->px / 2 + 1;
    auto real = fftw_buffer<double>(fft_->real_size());
    fft_->image_spectrum = fftw_buffer<fftw_complex>(fft_->complex_size());
    {
        std::lock_guard lock(planner_mutex());
        fft_->forward = fftw_plan_dft_r2c_2d(fft_->py, fft_->px, real.get(),
                                             fft_->image_spectrum.get(), FFTW_ESTIMATE);
        fft_->backward = fftw_plan_dft_c2r_2d(fft_->py, fft_->px, fft_->image_spectrum.get(),
                                              real.get(), FFTW_ESTIMATE);
    }
    if (!fft_->forward || !fft_->backward) throw std::runtime_error("FFTW planning failed");
    std::fill_n(real.get(), fft_->real_size(), 0.0);
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            real[static_cast<std::size_t>(y) * fft_->px + x] = centered_.at(x, y);
    fftw_execute_dft_r2c(fft_->forward, real.get(), fft_->image_spectrum.get());
}

Projector::~Projector() = default;

ProjectionField Projector::project(const ProjectionOperator& op) const {
    if (op.values.size() != shape_.support_size()) {
        throw std::invalid_argument("operator length does not match shape support");
    }
    ProjectionField field =
        method_ == ConvolutionMethod::Fft ? project_fft(op) : project_direct(op);
    field.sigma = standard_deviation(field.values);
    field.seed = op.seed;
    return field;
}

ProjectionField Projector::project_direct(const ProjectionOperator& op) const {
    ProjectionField field;
    field.region = region_;
    field.values.assign(region_.count(), 0.0);
    const auto support = shape_.support();
    const int iw = centered_.width();
    const auto src = centered_.data();
    // Support-major loop: each origin still sums its terms in canonical order.
    for (std::size_t k = 0; k < support.size(); ++k) {
        const double w = op.values[k];
        const Offset o = support[k];
        for (int y = 0; y < region_.height; ++y) {
            const double* row = src.data() + static_cast<std::size_t>(y + o.dy) * iw + o.dx;
            double* out = field.values.data() + static_cast<std::size_t>(y) * region_.width;
            for (int x = 0; x < region_.width; ++x) out[x] += w * row[x];
        }
    }
    return field;
}

ProjectionField Projector::project_fft(const ProjectionOperator& op) const {
    const FftState& f = *fft_;
    auto kernel = fftw_buffer<double>(f.real_size());
    auto spectrum = fftw_buffer<fftw_complex>(f.complex_size());
    std::fill_n(kernel.get(), f.real_size(), 0.0);
    const auto support = shape_.support();
    for (std::size_t k = 0; k < support.size(); ++k) {
        kernel[static_cast<std::size_t>(support[k].dy) * f.px + support[k].dx] = op.values[k];
    }
    fftw_execute_dft_r2c(f.forward, kernel.get(), spectrum.get());

    // Correlation: image spectrum times conjugated kernel spectrum.
    const fftw_complex* a = f.image_spectrum.get();
    fftw_complex* k = spectrum.get();
    for (std::size_t i = 0; i < f.complex_size(); ++i) {
        const double re = a[i][0] * k[i][0] + a[i][1] * k[i][1];
        const double im = a[i][1] * k[i][0] - a[i][0] * k[i][1];
        k[i][0] = re;
        k[i][1] = im;
    }
    fftw_execute_dft_c2r(f.backward, spectrum.get(), kernel.get());

    ProjectionField field;
    field.region = region_;
    field.values.resize(region_.count());
    const double scale = 1.0 / static_cast<double>(f.real_size());
    for (int y = 0; y < region_.height; ++y)
        for (int x = 0; x < region_.width; ++x)
            field.values[static_cast<std::size_t>(y) * region_.width + x] =
                kernel[static_cast<std::size_t>(y) * f.px + x] * scale;
    return field;
}

ProjectionField project_all(const Image& image, const Shape& shape, const ProjectionOperator& op,
                            ConvolutionMethod method) {
    return Projector(image, shape, method).project(op);
}

ScoreMode parse_mode(const std::string& name) {
    if (name == "count") return ScoreMode::Count;
    if (name == "smoothed") return ScoreMode::Smoothed;
    throw std::invalid_argument("unknown score mode '" + name + "'");
}

std::string to_string(ScoreMode mode) { return mode == ScoreMode::Count ? "count" : "smoothed"; }

double default_threshold(int side) {
    if (side <= 8) return 3.0;
    if (side >= 24) return 12.0;
    return 3.0 + (side - 8) * 9.0 / 16.0;
}

Origin ScoreMap::argmax() const {
    const auto it = std::max_element(values.begin(), values.end());
    return region.origin(static_cast<std::size_t>(it - values.begin()));
}

std::vector<double> block_deviations(const Image& image, const Shape& shape) {
    const OriginRegion region(image, shape);
    std::vector<double> devs(region.count(), 0.0);
    const auto support = shape.support();
    const double n = static_cast<double>(support.size());
    for (int y = 0; y < region.height; ++y) {
        for (int x = 0; x < region.width; ++x) {
            double sum = 0.0;
            for (const Offset& o : support) sum += image.at(x + o.dx, y + o.dy);
            const double mean = sum / n;
            double ss = 0.0;
            for (const Offset& o : support) {
                const double d = image.at(x + o.dx, y + o.dy) - mean;
                ss += d * d;
            }
            devs[static_cast<std::size_t>(y) * region.width + x] = std::sqrt(ss / n);
        }
    }
    return devs;
}

namespace {

constexpr double kFlatBlockDeviation = 1e-12;

ProjectionField make_pass_field(const Projector& projector, const Shape& shape,
                                const ScoringParams& params, std::size_t pass,
                                const std::vector<double>& devs) {
    ProjectionField field = projector.project(sample_operator(shape, pass_seed(params.seed, pass)));
    if (!params.normalize_by_block_dev) return field;
    std::vector<double> kept;
    kept.reserve(field.values.size());
    for (std::size_t i = 0; i < field.values.size(); ++i) {
        if (devs[i] <= kFlatBlockDeviation) {
            field.values[i] = 0.0;
        } else {
            field.values[i] /= devs[i];
            kept.push_back(field.values[i]);
        }
    }
    field.sigma = standard_deviation(kept);
    return field;
}

void validate(const ScoringParams& params) {
    if (params.passes < 0) throw std::invalid_argument("number of passes must be >= 0");
    if (!(params.a > 0.0)) throw std::invalid_argument("threshold multiplier a must be > 0");
}

}  // namespace

std::vector<ProjectionField> compute_fields(const Image& image, const Shape& shape,
                                            const ScoringParams& params) {
    validate(params);
    const Projector projector(image, shape, params.method);
    std::vector<double> devs;
    if (params.normalize_by_block_dev) devs = block_deviations(image, shape);
    std::vector<ProjectionField> fields(static_cast<std::size_t>(params.passes));
    parallel_for(fields.size(), params.threads, [&](std::size_t i) {
        fields[i] = make_pass_field(projector, shape, params, i, devs);
    });
    return fields;
}

void accumulate_pass(ScoreMap& map, const ProjectionField& field, double a) {
    if (!(field.region == map.region)) throw std::invalid_argument("field region mismatch");
    const double sigma = field.sigma;
    PassStats stats{field.seed, sigma, 0};
    if (sigma > 0.0) {
        const double cut = a * sigma;
        for (double v : field.values)
            if (std::abs(v) > cut) ++stats.exceedances;
    }
    map.pass_stats.push_back(stats);
    if (map.mode == ScoreMode::Count) {
        if (sigma > 0.0) {
            const double cut = a * sigma;
            for (std::size_t i = 0; i < field.values.size(); ++i)
                if (std::abs(field.values[i]) > cut) map.values[i] += 1.0;
        }
    } else if (sigma > 0.0) {
        for (std::size_t i = 0; i < field.values.size(); ++i)
            map.values[i] += smoothed_penalty(field.values[i], sigma);
    } else {
        for (double& v : map.values) v += 0.5;
    }
    ++map.passes;
}

ScoreMap score_image(const Image& image, const Shape& shape, const ScoringParams& params) {
    validate(params);
    const Projector projector(image, shape, params.method);
    std::vector<double> devs;
    if (params.normalize_by_block_dev) devs = block_deviations(image, shape);

    ScoreMap map;
    map.region = projector.region();
    map.values.assign(map.region.count(), 0.0);
    map.mode = params.mode;

    const std::size_t total = static_cast<std::size_t>(params.passes);
    const std::size_t batch = resolve_threads(params.threads);
    std::vector<ProjectionField> fields(batch);
    for (std::size_t start = 0; start < total; start += batch) {
        const std::size_t n = std::min(batch, total - start);
        parallel_for(n, params.threads, [&](std::size_t j) {
            fields[j] = make_pass_field(projector, shape, params, start + j, devs);
        });
        // Merge in pass order so smoothed sums are schedule independent.
        for (std::size_t j = 0; j < n; ++j) accumulate_pass(map, fields[j], params.a);
    }
    return map;
}

double smoothed_penalty(double x, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("smoothed_penalty requires sigma > 0");
    return 0.5 + (x * x) / (2.0 * sigma * sigma);
}

std::vector<Candidate> top_candidates(const OriginRegion& region, std::span<const double> values,
                                      std::size_t k, const Shape& shape, SeparationRule rule) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (values.size() != region.count()) throw std::invalid_argument("value count mismatch");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    std::vector<Candidate> picked;
    for (std::size_t idx : order) {
        if (picked.size() >= k) break;
        const Origin r = region.origin(idx);
        const bool clear = std::all_of(picked.begin(), picked.end(), [&](const Candidate& c) {
            return origins_disjoint(c.origin, r, shape, rule);
        });
        if (clear) picked.push_back({r, values[idx]});
    }
    return picked;
}

std::vector<Candidate> top_candidates(const ScoreMap& map, std::size_t k, const Shape& shape,
                                      SeparationRule rule) {
    return top_candidates(map.region, map.values, k, shape, rule);
}

std::size_t symmetric_bin(double x, double half_range, std::size_t bins) {
    if (!(half_range > 0.0)) return bins / 2;
    const double t = (x + half_range) / (2.0 * half_range) * static_cast<double>(bins);
    if (!(t > 0.0)) return 0;
    const auto i = static_cast<std::size_t>(t);
    return i >= bins ? bins - 1 : i;
}

Moments compute_moments(std::span<const double> values) {
    Moments m;
    if (values.empty()) return m;
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    m.mean = sum / n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : values) {
        const double d2 = (v - m.mean) * (v - m.mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    m.sd = std::sqrt(m2);
    m.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
    return m;
}

double Histogram::log_probability(std::size_t bin) const {
    if (counts[bin] == 0 || total == 0) return -std::numeric_limits<double>::infinity();
    return std::log(static_cast<double>(counts[bin]) / static_cast<double>(total));
}

Histogram make_histogram(std::span<const double> values, std::size_t bins) {
    if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
    Histogram h;
    for (double v : values) h.half_range = std::max(h.half_range, std::abs(v));
    const double layout = h.half_range > 0.0 ? h.half_range : 1.0;
    const double width = 2.0 * layout / static_cast<double>(bins);
    h.centers.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) h.centers[i] = -layout + (static_cast<double>(i) + 0.5) * width;
    h.counts.assign(bins, 0);
    for (double v : values) ++h.counts[symmetric_bin(v, h.half_range, bins)];
    h.total = values.size();
    h.moments = compute_moments(values);
    return h;
}

Histogram projection_histogram(const Image& image, const Shape& shape, int passes,
                               std::size_t bins, std::uint64_t seed, ConvolutionMethod method,
                               unsigned threads) {
    if (bins < 2) throw std::invalid_argument("histogram needs at least two bins");
    if (passes < 1) throw std::invalid_argument("histogram needs at least one pass");
    ScoringParams params;
    params.passes = passes;
    params.seed = seed;
    params.method = method;
    params.threads = threads;
    params.a = 1.0;
    const auto fields = compute_fields(image, shape, params);
    std::vector<double> pooled;
    pooled.reserve(fields.size() * fields.front().values.size());
    for (const auto& f : fields) pooled.insert(pooled.end(), f.values.begin(), f.values.end());
    return make_histogram(pooled, bins);
}

}  // namespace rarity
