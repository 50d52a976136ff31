#include <cmath>
#include <random>
#include <string>

#include "doctest.h"
#include "rarity/core.hpp"
#include "support.hpp"

using namespace rarity;

TEST_CASE("image construction validates its input") {
    CHECK_THROWS_AS(Image(0, 3), std::invalid_argument);
    CHECK_THROWS_AS(Image(2, 2, std::vector<double>(3)), std::invalid_argument);
    CHECK_THROWS_AS(Image(1, 2, std::vector<double>{0.0, std::nan("")}), std::invalid_argument);
    const Image img(3, 2, std::vector<double>{0, 1, 2, 3, 4, 5});
    CHECK(img.at(2, 1) == 5);
    const Image t = img.transposed();
    CHECK(t.width() == 2);
    CHECK(t.height() == 3);
    CHECK(t.at(1, 2) == img.at(2, 1));
}

TEST_CASE("shape construction") {
    SUBCASE("single pixel support is rejected") {
        CHECK_THROWS_AS(Shape(1, 1, {1}), std::invalid_argument);
        CHECK_THROWS_AS(Shape::square(1), std::invalid_argument);
    }
    SUBCASE("loose bounding box is rejected") {
        CHECK_THROWS_AS(Shape(3, 3, {1, 1, 0, 1, 1, 0, 0, 0, 0}), std::invalid_argument);
        CHECK_THROWS_AS(Shape(2, 2, {0, 0, 1, 1}), std::invalid_argument);
    }
    SUBCASE("support is row-major over mask pixels") {
        const Shape ring(3, 3, {1, 1, 1, 1, 0, 1, 1, 1, 1});
        REQUIRE(ring.support_size() == 8);
        CHECK(ring.support()[3].dx == 0);
        CHECK(ring.support()[3].dy == 1);
        CHECK(ring.support()[4].dx == 2);
        CHECK(ring.support()[4].dy == 1);
        CHECK_FALSE(ring.is_full_rectangle());
    }
    SUBCASE("geometry") {
        const Shape r = Shape::rectangle(3, 4);
        CHECK(r.diameter() == doctest::Approx(5.0));
        CHECK(r.side() == 4);
        CHECK(r.is_full_rectangle());
    }
}

TEST_CASE("origin region") {
    const Image img(10, 7);
    const OriginRegion region(img, Shape::rectangle(4, 3));
    CHECK(region.width == 7);
    CHECK(region.height == 5);
    CHECK(region.count() == 35);
    CHECK(region.origin(region.index({6, 4})) == Origin{6, 4});
    CHECK(OriginRegion(img, Shape::square(8)).empty());
    CHECK(OriginRegion(img, Shape::rectangle(10, 7)).count() == 1);
}

TEST_CASE("cut_block") {
    SUBCASE("constant image") {
        const Image img(9, 9, 0.5);
        const Block b = cut_block(img, Shape(3, 2, {1, 0, 1, 1, 1, 1}), {4, 6});
        CHECK(b.values == std::vector<double>(5, 0.5));
    }
    SUBCASE("index arithmetic") {
        std::vector<double> d(9);
        for (int i = 0; i < 9; ++i) d[i] = i / 8.0;
        const Block b = cut_block(Image(3, 3, d), Shape::square(2), {1, 1});
        CHECK(b.values == std::vector<double>{4 / 8.0, 5 / 8.0, 7 / 8.0, 8 / 8.0});
        CHECK(b.origin == Origin{1, 1});
    }
    SUBCASE("ring mask matches a per-pixel gather") {
        const Image img = test::random_image(16, 16, 7);
        std::vector<std::uint8_t> m(25, 1);
        for (int y = 1; y < 4; ++y)
            for (int x = 1; x < 4; ++x) m[y * 5 + x] = 0;
        const Shape ring(5, 5, m);
        CHECK(cut_block(img, ring, {3, 2}).values == test::gather(img, ring, {3, 2}));
    }
    SUBCASE("out of region reports the coordinates") {
        const Image img(8, 8);
        try {
            cut_block(img, Shape::square(4), {5, 1});
            FAIL("expected GeometryError");
        } catch (const GeometryError& e) {
            CHECK(std::string(e.what()).find("(5, 1)") != std::string::npos);
        }
        CHECK_THROWS_AS(cut_block(img, Shape::square(4), {-1, 0}), GeometryError);
    }
}

TEST_CASE("block_distance") {
    const std::vector<double> a{0, 0};
    const std::vector<double> b{3, 4};
    CHECK(block_distance(a, a) == 0.0);
    CHECK(block_distance(a, b, Norm::L2) == 5.0);
    CHECK(block_distance(a, b, Norm::L1) == 7.0);
    CHECK_THROWS_AS(block_distance(a, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("block_distance is a metric on random triples") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n;
    for (const Norm norm : {Norm::L2, Norm::L1}) {
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> x(17), y(17), z(17);
            for (std::size_t i = 0; i < x.size(); ++i) {
                x[i] = n(rng);
                y[i] = n(rng);
                z[i] = n(rng);
            }
            CHECK(block_distance(x, y, norm) == block_distance(y, x, norm));
            CHECK(block_distance(x, z, norm) <=
                  block_distance(x, y, norm) + block_distance(y, z, norm) + 1e-9);
        }
    }
}

TEST_CASE("self distance is zero at every origin") {
    const Image img = test::random_image(12, 10, 3);
    const Shape s = test::random_shape(4, 3, 5);
    const OriginRegion region(img, s);
    for (std::size_t i = 0; i < region.count(); ++i) {
        const Block b = cut_block(img, s, region.origin(i));
        CHECK(block_distance(b, b) == 0.0);
    }
}

TEST_CASE("origins_disjoint examples") {
    const Shape s = Shape::square(8);
    CHECK_FALSE(origins_disjoint({3, 3}, {3, 3}, s));
    CHECK(origins_disjoint({0, 0}, {8, 0}, s));
    CHECK_FALSE(origins_disjoint({0, 0}, {7, 7}, s));
    CHECK(origins_disjoint({0, 0}, {0, 8}, s));
}

TEST_CASE("euclidean rule uses the bounding-box diagonal") {
    const Shape s = Shape::rectangle(3, 4);
    CHECK_FALSE(origins_disjoint({0, 0}, {3, 4}, s, SeparationRule::Euclidean));
    CHECK(origins_disjoint({0, 0}, {6, 0}, s, SeparationRule::Euclidean));
    CHECK_FALSE(origins_disjoint({0, 0}, {5, 0}, s, SeparationRule::Euclidean));
}

TEST_CASE("origins_disjoint is symmetric and never admits overlap") {
    const std::vector<Shape> shapes{Shape::square(2), Shape::square(3), Shape::rectangle(2, 4),
                                    Shape(3, 3, {0, 1, 0, 1, 1, 1, 0, 1, 0}),
                                    test::random_shape(4, 3, 9)};
    for (const Shape& s : shapes) {
        for (const SeparationRule rule : {SeparationRule::Chebyshev, SeparationRule::Euclidean}) {
            for (int dy = -8; dy <= 8; ++dy)
                for (int dx = -8; dx <= 8; ++dx) {
                    const Origin a{10, 10};
                    const Origin b{10 + dx, 10 + dy};
                    const bool d = origins_disjoint(a, b, s, rule);
                    CHECK(d == origins_disjoint(b, a, s, rule));
                    if (d) CHECK_FALSE(test::placements_overlap(s, a, b));
                }
        }
    }
}

TEST_CASE("chebyshev rule is exact for full squares") {
    for (int k = 2; k <= 4; ++k) {
        const Shape s = Shape::square(k);
        for (int dy = -6; dy <= 6; ++dy)
            for (int dx = -6; dx <= 6; ++dx) {
                const Origin a{0, 0};
                const Origin b{dx, dy};
                CHECK(origins_disjoint(a, b, s) == !test::placements_overlap(s, a, b));
            }
    }
}

TEST_CASE("parsers") {
    CHECK(parse_norm("l1") == Norm::L1);
    CHECK(parse_norm("L2") == Norm::L2);
    CHECK_THROWS_AS(parse_norm("linf"), std::invalid_argument);
    CHECK(parse_separation("euclidean") == SeparationRule::Euclidean);
    CHECK_THROWS_AS(parse_separation("manhattan"), std::invalid_argument);
}
