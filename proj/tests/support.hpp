#pragma once

// Shared fixtures and independent reference implementations for the tests.
// Nothing here calls into the code under test except the types it returns.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "rarity/core.hpp"
#include "rarity/synth.hpp"

namespace rarity::test {

inline Image random_image(int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(w, h);
    for (auto& v : img.data()) v = u(rng);
    return img;
}

/// Random mask with a tight bounding box: corners of the first/last rows and
/// columns are forced on where needed.
inline Shape random_shape(int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution on(0.5);
    std::vector<std::uint8_t> m(static_cast<std::size_t>(w) * h);
    for (auto& v : m) v = on(rng) ? 1 : 0;
    m[0] = 1;
    m[m.size() - 1] = 1;
    return Shape(w, h, std::move(m));
}

/// The 64x64 planted-checker instance used by the statistical checks.
struct PlantedInstance {
    Image image;
    Origin plant;
};

inline PlantedInstance planted_checker(int seed) {
    std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(seed));
    std::uniform_int_distribution<int> pos(0, 56);
    synth::SynthSpec spec;
    spec.seed = static_cast<std::uint64_t>(seed);
    spec.background = synth::GaussianNoise{0.5, 0.1};
    synth::Plant p;
    p.origin.x = pos(rng);
    p.origin.y = pos(rng);
    p.patch = synth::Checker{0.2, 0.8, 1};
    spec.plants.push_back(p);
    auto g = synth::generate(spec);
    return {std::move(g.image), g.truth.front()};
}

/// Direct gather of A(rho + r) over mask pixels, scanning the mask itself.
inline std::vector<double> gather(const Image& img, const Shape& s, Origin r) {
    std::vector<double> out;
    for (int y = 0; y < s.height(); ++y)
        for (int x = 0; x < s.width(); ++x)
            if (s.contains(x, y)) out.push_back(img.at(r.x + x, r.y + y));
    return out;
}

/// Whether two placements share a support pixel, by pixel enumeration.
inline bool placements_overlap(const Shape& s, Origin a, Origin b) {
    for (int y = 0; y < s.height(); ++y)
        for (int x = 0; x < s.width(); ++x) {
            if (!s.contains(x, y)) continue;
            const int u = a.x + x - b.x;
            const int v = a.y + y - b.y;
            if (u >= 0 && v >= 0 && u < s.width() && v < s.height() && s.contains(u, v)) return true;
        }
    return false;
}

/// Quadruple-loop nearest disjoint neighbour distances for a full square
/// of side k, L2 norm, Chebyshev separation. NaN when no partner exists.
inline std::vector<double> naive_nn_distance(const Image& img, int k) {
    const int ow = img.width() - k + 1;
    const int oh = img.height() - k + 1;
    std::vector<double> out;
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double best = std::numeric_limits<double>::infinity();
            for (int y2 = 0; y2 < oh; ++y2)
                for (int x2 = 0; x2 < ow; ++x2) {
                    if (std::max(std::abs(x - x2), std::abs(y - y2)) < k) continue;
                    double acc = 0.0;
                    for (int j = 0; j < k; ++j)
                        for (int i = 0; i < k; ++i) {
                            const double d = img.at(x + i, y + j) - img.at(x2 + i, y2 + j);
                            acc += d * d;
                        }
                    best = std::min(best, std::sqrt(acc));
                }
            out.push_back(std::isinf(best) ? std::numeric_limits<double>::quiet_NaN() : best);
        }
    return out;
}

}  // namespace rarity::test
