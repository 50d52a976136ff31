#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "rarity/projection.hpp"
#include "support.hpp"

using namespace rarity;

namespace {

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double norm2(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

// C(r) = sum_rho X(rho) A(rho + r), evaluated origin by origin.
std::vector<double> naive_correlation(const Image& img, const Shape& s, const ProjectionOperator& op) {
    const OriginRegion region(img, s);
    std::vector<double> out;
    for (std::size_t i = 0; i < region.count(); ++i) {
        const auto block = test::gather(img, s, region.origin(i));
        double acc = 0.0;
        for (std::size_t k = 0; k < block.size(); ++k) acc += op.values[k] * block[k];
        out.push_back(acc);
    }
    return out;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("sampled operators are centered and normalized") {
    for (int k = 0; k < 20; ++k) {
        const Shape s = test::random_shape(2 + k % 7, 2 + (k * 3) % 5, 100 + k);
        const auto op = sample_operator(s, static_cast<std::uint64_t>(k));
        REQUIRE(op.values.size() == s.support_size());
        CHECK(std::abs(sum(op.values)) <= 1e-9);
        CHECK(std::abs(norm2(op.values) - 1.0) <= 1e-9);
    }
}

TEST_CASE("two-pixel operator is forced") {
    const auto op = sample_operator(Shape::rectangle(2, 1), 42);
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(op.values[0]) == doctest::Approx(r).epsilon(1e-12));
    CHECK(op.values[1] == doctest::Approx(-op.values[0]).epsilon(1e-12));
}

TEST_CASE("operators are deterministic in the seed") {
    const Shape s = Shape::square(5);
    CHECK(sample_operator(s, 9).values == sample_operator(s, 9).values);
    CHECK(sample_operator(s, 9).values != sample_operator(s, 10).values);
    CHECK(pass_seed(3, 0) != pass_seed(3, 1));
    CHECK(pass_seed(3, 1) == pass_seed(3, 1));
}

TEST_CASE("constant image projects to zero") {
    const Image img(20, 15, 0.37);
    for (const auto m : {ConvolutionMethod::Direct, ConvolutionMethod::Fft}) {
        const auto f = project_all(img, Shape::square(6), sample_operator(Shape::square(6), 1), m);
        CHECK(f.sigma == 0.0);
        CHECK(std::all_of(f.values.begin(), f.values.end(), [](double v) { return v == 0.0; }));
    }
}

TEST_CASE("delta image reproduces the operator") {
    Image img(12, 10, 0.0);
    const Origin q{6, 5};
    img.at(q.x, q.y) = 1.0;
    const Shape s(3, 3, {1, 1, 0, 0, 1, 1, 1, 0, 1});
    const auto op = sample_operator(s, 4);
    for (const auto m : {ConvolutionMethod::Direct, ConvolutionMethod::Fft}) {
        const auto f = project_all(img, s, op, m);
        for (std::size_t i = 0; i < f.region.count(); ++i) {
            const Origin r = f.region.origin(i);
            const int dx = q.x - r.x;
            const int dy = q.y - r.y;
            double expected = 0.0;
            if (dx >= 0 && dy >= 0 && dx < s.width() && dy < s.height() && s.contains(dx, dy)) {
                std::size_t k = 0;
                while (s.support()[k].dx != dx || s.support()[k].dy != dy) ++k;
                expected = op.values[k];
            }
            CHECK(f.values[i] == doctest::Approx(expected).epsilon(1e-12).scale(1.0));
        }
    }
}

TEST_CASE("both methods match the naive correlation") {
    const Image img = test::random_image(32, 32, 17);
    for (const Shape& s : {Shape::square(8), test::random_shape(5, 7, 3)}) {
        const auto op = sample_operator(s, 77);
        const auto ref = naive_correlation(img, s, op);
        CHECK(max_abs_diff(project_all(img, s, op, ConvolutionMethod::Direct).values, ref) <= 1e-12);
        CHECK(max_abs_diff(project_all(img, s, op, ConvolutionMethod::Fft).values, ref) <= 1e-6);
    }
}

TEST_CASE("non-square images and odd sizes") {
    const Image img = test::random_image(37, 23, 5);
    const Shape s = Shape::rectangle(9, 4);
    const auto op = sample_operator(s, 1);
    const auto d = project_all(img, s, op, ConvolutionMethod::Direct);
    const auto f = project_all(img, s, op, ConvolutionMethod::Fft);
    CHECK(d.region == OriginRegion(29, 20));
    CHECK(max_abs_diff(d.values, f.values) <= 1e-9);
}

TEST_CASE("projection is linear in the image") {
    const Image a = test::random_image(24, 20, 1);
    const Image b = test::random_image(24, 20, 2);
    Image diff(24, 20);
    for (std::size_t i = 0; i < diff.size(); ++i) diff.data()[i] = b.data()[i] - a.data()[i];
    const Shape s = Shape::square(5);
    const auto op = sample_operator(s, 8);
    for (const auto m : {ConvolutionMethod::Direct, ConvolutionMethod::Fft}) {
        const auto fa = project_all(a, s, op, m);
        const auto fb = project_all(b, s, op, m);
        const auto fd = project_all(diff, s, op, m);
        for (std::size_t i = 0; i < fd.values.size(); ++i)
            CHECK(std::abs((fb.values[i] - fa.values[i]) - fd.values[i]) <= 1e-9);
    }
}

TEST_CASE("projection rejects shapes larger than the image") {
    const Image img(8, 8, 0.5);
    CHECK_THROWS_AS(project_all(img, Shape::rectangle(9, 2), sample_operator(Shape::rectangle(9, 2), 0)),
                    GeometryError);
}

TEST_CASE("sigma is the population deviation of the field") {
    const Image img = test::random_image(20, 20, 3);
    const auto f = project_all(img, Shape::square(4), sample_operator(Shape::square(4), 5));
    const double n = static_cast<double>(f.values.size());
    const double mean = sum(f.values) / n;
    double ss = 0.0;
    for (double v : f.values) ss += (v - mean) * (v - mean);
    CHECK(f.sigma == doctest::Approx(std::sqrt(ss / n)).epsilon(1e-12));
    CHECK(standard_deviation(std::vector<double>{1, 3}) == 1.0);
}

TEST_CASE("smoothed penalty") {
    CHECK(smoothed_penalty(0.0, 2.0) == 0.5);
    CHECK(smoothed_penalty(2.0, 2.0) == 1.0);
    CHECK(smoothed_penalty(4.0, 2.0) == 2.5);
    CHECK_THROWS_AS(smoothed_penalty(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(smoothed_penalty(1.0, -1.0), std::invalid_argument);
}

TEST_CASE("default threshold") {
    CHECK(default_threshold(4) == 3.0);
    CHECK(default_threshold(8) == 3.0);
    CHECK(default_threshold(16) == 7.5);
    CHECK(default_threshold(24) == 12.0);
    CHECK(default_threshold(48) == 12.0);
}

TEST_CASE("degenerate scoring inputs") {
    const Shape s = Shape::square(4);
    ScoringParams p;
    p.passes = 7;
    p.a = 2.0;
    SUBCASE("constant image scores zero in count mode") {
        const auto map = score_image(Image(16, 16, 0.8), s, p);
        CHECK(std::all_of(map.values.begin(), map.values.end(), [](double v) { return v == 0.0; }));
        CHECK(map.passes == 7);
    }
    SUBCASE("constant image adds one half per pass in smoothed mode") {
        p.mode = ScoreMode::Smoothed;
        const auto map = score_image(Image(16, 16, 0.8), s, p);
        CHECK(std::all_of(map.values.begin(), map.values.end(), [](double v) { return v == 3.5; }));
    }
    SUBCASE("zero passes") {
        p.passes = 0;
        const auto map = score_image(test::random_image(16, 16, 1), s, p);
        CHECK(std::all_of(map.values.begin(), map.values.end(), [](double v) { return v == 0.0; }));
        CHECK(map.pass_stats.empty());
    }
    SUBCASE("invalid parameters") {
        p.a = 0.0;
        CHECK_THROWS_AS(score_image(Image(16, 16), s, p), std::invalid_argument);
        p.a = 1.0;
        p.passes = -1;
        CHECK_THROWS_AS(score_image(Image(16, 16), s, p), std::invalid_argument);
    }
}

TEST_CASE("count scores equal independent exceedance counts") {
    const Image img = test::random_image(40, 30, 21);
    const Shape s = Shape::square(6);
    ScoringParams p;
    p.passes = 12;
    p.a = 1.5;
    p.seed = 5;
    const auto map = score_image(img, s, p);
    const auto fields = compute_fields(img, s, p);
    REQUIRE(fields.size() == 12);

    std::vector<double> expected(map.values.size(), 0.0);
    std::size_t tail = 0;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto op = sample_operator(s, pass_seed(p.seed, i));
        const auto ref = naive_correlation(img, s, op);
        CHECK(max_abs_diff(ref, fields[i].values) <= 1e-12);
        std::size_t pass_tail = 0;
        for (std::size_t j = 0; j < ref.size(); ++j) {
            if (std::abs(fields[i].values[j]) > p.a * fields[i].sigma) {
                expected[j] += 1.0;
                ++pass_tail;
            }
        }
        CHECK(map.pass_stats[i].exceedances == pass_tail);
        tail += pass_tail;
    }
    CHECK(map.values == expected);
    CHECK(std::accumulate(map.values.begin(), map.values.end(), 0.0) == static_cast<double>(tail));
    for (double v : map.values) CHECK((v >= 0.0 && v <= 12.0 && v == std::floor(v)));
}

TEST_CASE("smoothed scores are bounded below by M/2") {
    const Image img = test::random_image(30, 30, 4);
    ScoringParams p;
    p.passes = 9;
    p.mode = ScoreMode::Smoothed;
    const auto map = score_image(img, Shape::square(5), p);
    for (double v : map.values) CHECK(v >= 4.5);
}

TEST_CASE("count scores are invariant to a global brightness shift") {
    Image img = test::random_image(48, 40, 13);
    for (double& v : img.data()) v *= 0.8;
    Image shifted = img;
    for (double& v : shifted.data()) v += 0.1;
    ScoringParams p;
    p.passes = 20;
    p.a = 2.5;
    for (const auto m : {ConvolutionMethod::Direct, ConvolutionMethod::Fft}) {
        p.method = m;
        CHECK(score_image(img, Shape::square(7), p).values ==
              score_image(shifted, Shape::square(7), p).values);
    }
}

TEST_CASE("scores do not depend on the thread count") {
    const Image img = test::random_image(50, 44, 8);
    ScoringParams p;
    p.passes = 11;
    p.a = 2.0;
    for (const auto mode : {ScoreMode::Count, ScoreMode::Smoothed}) {
        p.mode = mode;
        p.threads = 1;
        const auto one = score_image(img, Shape::square(9), p);
        for (unsigned t : {2u, 3u, 8u}) {
            p.threads = t;
            const auto many = score_image(img, Shape::square(9), p);
            CHECK(many.values == one.values);
        }
    }
}

TEST_CASE("block deviation normalization") {
    Image img = test::random_image(24, 24, 6);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) img.at(x, y) = 0.25;
    const Shape s = Shape::square(4);
    const auto devs = block_deviations(img, s);
    const OriginRegion region(img, s);
    CHECK(devs[region.index({0, 0})] == 0.0);
    const auto block = test::gather(img, s, {12, 9});
    const double mean = sum(block) / 16.0;
    double ss = 0.0;
    for (double v : block) ss += (v - mean) * (v - mean);
    CHECK(devs[region.index({12, 9})] == doctest::Approx(std::sqrt(ss / 16.0)).epsilon(1e-12));

    ScoringParams p;
    p.passes = 3;
    p.normalize_by_block_dev = true;
    const auto fields = compute_fields(img, s, p);
    const auto raw = project_all(img, s, sample_operator(s, pass_seed(0, 0)));
    CHECK(fields[0].at({0, 0}) == 0.0);
    CHECK(fields[0].at({12, 9}) ==
          doctest::Approx(raw.at({12, 9}) / devs[region.index({12, 9})]).epsilon(1e-12));
}

TEST_CASE("top candidates") {
    const Shape s = Shape::square(3);
    const OriginRegion region(8, 8);
    SUBCASE("all-zero map yields row-major disjoint origins") {
        const std::vector<double> v(region.count(), 0.0);
        const auto c = top_candidates(region, v, 3, s);
        REQUIRE(c.size() == 3);
        CHECK(c[0].origin == Origin{0, 0});
        CHECK(c[1].origin == Origin{3, 0});
        CHECK(c[2].origin == Origin{6, 0});
    }
    SUBCASE("unique maximum first") {
        std::vector<double> v(region.count(), 1.0);
        v[region.index({5, 4})] = 9.0;
        CHECK(top_candidates(region, v, 1, s)[0].origin == Origin{5, 4});
    }
    SUBCASE("overlapping equal maxima keep only the earlier one") {
        std::vector<double> v(region.count(), 0.0);
        v[region.index({4, 4})] = 5.0;
        v[region.index({3, 5})] = 5.0;
        const auto c = top_candidates(region, v, 2, s);
        CHECK(c[0].origin == Origin{4, 4});
        CHECK(c[1].score == 0.0);
    }
    SUBCASE("k larger than the disjoint capacity") {
        const std::vector<double> v(region.count(), 0.0);
        CHECK(top_candidates(region, v, 100, s).size() == 9);
        CHECK_THROWS_AS(top_candidates(region, v, 0, s), std::invalid_argument);
    }
}

TEST_CASE("symmetric binning") {
    CHECK(symmetric_bin(-1.0, 1.0, 4) == 0);
    CHECK(symmetric_bin(-0.5, 1.0, 4) == 1);
    CHECK(symmetric_bin(0.0, 1.0, 4) == 2);
    CHECK(symmetric_bin(1.0, 1.0, 4) == 3);
    CHECK(symmetric_bin(7.0, 1.0, 4) == 3);
    CHECK(symmetric_bin(-7.0, 1.0, 4) == 0);
    CHECK(symmetric_bin(3.0, 0.0, 5) == 2);
}

TEST_CASE("moments") {
    const auto m = compute_moments(std::vector<double>{-1, 1, -1, 1});
    CHECK(m.mean == 0.0);
    CHECK(m.sd == 1.0);
    CHECK(m.excess_kurtosis == doctest::Approx(-2.0));
    CHECK(compute_moments(std::vector<double>{2, 2, 2}).excess_kurtosis == 0.0);
}

TEST_CASE("projection histogram") {
    const Shape s = Shape::square(5);
    SUBCASE("constant image fills the center bin") {
        const auto h = projection_histogram(Image(20, 20, 0.5), s, 4, 9, 1);
        CHECK(h.counts[4] == h.total);
        CHECK(h.total == 4u * 16u * 16u);
    }
    SUBCASE("counts are conserved and match the fields") {
        const Image img = test::random_image(30, 26, 2);
        const auto h = projection_histogram(img, s, 6, 31, 3);
        CHECK(std::accumulate(h.counts.begin(), h.counts.end(), std::uint64_t{0}) == 6u * 26u * 22u);
        ScoringParams p;
        p.passes = 6;
        p.seed = 3;
        std::vector<double> pooled;
        for (const auto& f : compute_fields(img, s, p))
            pooled.insert(pooled.end(), f.values.begin(), f.values.end());
        std::vector<std::uint64_t> counts(31, 0);
        double hr = 0.0;
        for (double v : pooled) hr = std::max(hr, std::abs(v));
        for (double v : pooled) {
            const double t = (v + hr) / (2 * hr) * 31;
            ++counts[std::min<std::size_t>(30, static_cast<std::size_t>(std::max(0.0, t)))];
        }
        CHECK(h.counts == counts);
        CHECK(h.half_range == hr);
        CHECK(h.centers[15] == doctest::Approx(0.0).scale(1.0));
    }
    SUBCASE("argument checks") {
        CHECK_THROWS_AS(projection_histogram(Image(20, 20), s, 0, 9, 1), std::invalid_argument);
        CHECK_THROWS_AS(projection_histogram(Image(20, 20), s, 3, 1, 1), std::invalid_argument);
    }
    SUBCASE("log probability") {
        Histogram h = make_histogram(std::vector<double>{-1, 1, 1, 1}, 3);
        CHECK(h.log_probability(2) == doctest::Approx(std::log(0.75)));
        CHECK(std::isinf(h.log_probability(1)));
    }
}

TEST_CASE("parsers") {
    CHECK(parse_method("fft") == ConvolutionMethod::Fft);
    CHECK(parse_mode("smoothed") == ScoreMode::Smoothed);
    CHECK(to_string(ScoreMode::Count) == "count");
    CHECK_THROWS_AS(parse_method("winograd"), std::invalid_argument);
    CHECK_THROWS_AS(parse_mode("sum"), std::invalid_argument);
}
