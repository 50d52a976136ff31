#include "rarity/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rarity/parallel.hpp"

namespace rarity {

namespace {

// Squared-L2 or L1 accumulation with early exit once the partial sum
// exceeds `bound`. Terms are added in canonical support order, so a pair
// that runs to completion yields exactly the naive sum.
template <Norm N>
double partial_distance(const double* a, const double* b, const std::vector<std::size_t>& offsets,
                        double bound) {
    double acc = 0.0;
    const std::size_t n = offsets.size();
    std::size_t k = 0;
    while (k < n) {
        const std::size_t stop = std::min(n, k + 8);
        for (; k < stop; ++k) {
            const double d = a[offsets[k]] - b[offsets[k]];
            if constexpr (N == Norm::L2) {
                acc += d * d;
            } else {
                acc += std::abs(d);
            }
        }
        if (acc > bound) return acc;
    }
    return acc;
}

template <Norm N>
void fill_map(const Image& image, const Shape& shape, const OracleOptions& options,
              DistanceMap& map) {
    const auto& region = map.region;
    std::vector<std::size_t> offsets;
    for (const Offset& o : shape.support())
        offsets.push_back(static_cast<std::size_t>(o.dy) * image.width() + o.dx);
    const double* data = image.data().data();
    const auto base = [&](Origin r) {
        return data + static_cast<std::size_t>(r.y) * image.width() + r.x;
    };

    parallel_for(region.count(), options.threads, [&](std::size_t i) {
        const Origin r = region.origin(i);
        const double* a = base(r);
        double best = std::numeric_limits<double>::infinity();
        bool found = false;
        for (std::size_t j = 0; j < region.count(); ++j) {
            const Origin r2 = region.origin(j);
            if (!origins_disjoint(r, r2, shape, options.rule)) continue;
            found = true;
            const double d = partial_distance<N>(a, base(r2), offsets, best);
            if (d < best) best = d;
        }
        double value = std::numeric_limits<double>::quiet_NaN();
        if (found) value = N == Norm::L2 ? std::sqrt(best) : best;
        map.values[i] = value;
    });
}

}  // namespace

DistanceMap nn_distance_map(const Image& image, const Shape& shape, const OracleOptions& options) {
    DistanceMap map;
    map.region = OriginRegion(image, shape);
    map.norm = options.norm;
    if (map.region.empty()) throw GeometryError("shape does not fit image");
    // The diagonal corners are the farthest-apart pair under either rule.
    const Origin far{map.region.width - 1, map.region.height - 1};
    if (!origins_disjoint({0, 0}, far, shape, options.rule)) {
        throw GeometryError("no pair of disjoint placements exists for this shape and image");
    }
    map.values.assign(map.region.count(), 0.0);
    if (options.norm == Norm::L2) {
        fill_map<Norm::L2>(image, shape, options, map);
    } else {
        fill_map<Norm::L1>(image, shape, options, map);
    }
    return map;
}

RarestBlock rarest_block(const DistanceMap& map) {
    RarestBlock best{{0, 0}, -std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        const double d = map.values[i];
        if (std::isnan(d)) continue;
        if (d > best.distance) best = {map.region.origin(i), d};
    }
    if (best.distance < 0.0) throw GeometryError("distance map has no finite entries");
    return best;
}

RarestBlock rarest_block(const Image& image, const Shape& shape, const OracleOptions& options) {
    return rarest_block(nn_distance_map(image, shape, options));
}

std::vector<Outlier> distance_outliers(const DistanceMap& map, double z, const Shape& shape,
                                       SeparationRule rule) {
    if (map.values.empty()) throw std::invalid_argument("distance map is empty");
    std::vector<std::size_t> finite;
    double sum = 0.0;
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        if (std::isnan(map.values[i])) continue;
        finite.push_back(i);
        sum += map.values[i];
    }
    if (finite.empty()) return {};
    const double mean = sum / static_cast<double>(finite.size());
    double ss = 0.0;
    for (std::size_t i : finite) ss += (map.values[i] - mean) * (map.values[i] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(finite.size()));
    if (!(sd > 0.0)) return {};

    const double cut = mean + z * sd;
    std::vector<std::size_t> above;
    for (std::size_t i : finite)
        if (map.values[i] > cut) above.push_back(i);
    std::stable_sort(above.begin(), above.end(),
                     [&](std::size_t a, std::size_t b) { return map.values[a] > map.values[b]; });

    std::vector<Outlier> out;
    for (std::size_t i : above) {
        const Origin r = map.region.origin(i);
        const bool clear = std::all_of(out.begin(), out.end(), [&](const Outlier& o) {
            return origins_disjoint(o.origin, r, shape, rule);
        });
        if (clear) out.push_back({r, map.values[i], (map.values[i] - mean) / sd});
    }
    return out;
}

}  // namespace rarity
