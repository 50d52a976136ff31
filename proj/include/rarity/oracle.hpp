#pragma once

// Exact nearest-disjoint-neighbour search. Quadratic in the number of
// origins; kept independent of the projection path so it can serve as
// ground truth.

#include <cstddef>
#include <vector>

#include "rarity/core.hpp"

namespace rarity {

struct DistanceMap {
    OriginRegion region{0, 0};
    std::vector<double> values;  ///< d(r), min distance to any disjoint placement
    Norm norm = Norm::L2;

    double at(Origin r) const { return values[region.index(r)]; }
};

struct OracleOptions {
    Norm norm = Norm::L2;
    SeparationRule rule = SeparationRule::Chebyshev;
    unsigned threads = 1;
};

/// For every origin r, the minimum block distance to any disjoint origin.
/// Throws GeometryError when no disjoint pair of placements exists.
DistanceMap nn_distance_map(const Image& image, const Shape& shape, const OracleOptions& options = {});

struct RarestBlock {
    Origin origin;
    double distance = 0.0;
};

/// Argmax of the distance map, ties broken row-major.
RarestBlock rarest_block(const Image& image, const Shape& shape, const OracleOptions& options = {});
RarestBlock rarest_block(const DistanceMap& map);

struct Outlier {
    Origin origin;
    double distance = 0.0;
    double z_score = 0.0;
};

/// Origins whose distance exceeds mean + z * stddev of the map, in
/// decreasing distance order, greedily restricted to disjoint placements.
std::vector<Outlier> distance_outliers(const DistanceMap& map, double z, const Shape& shape,
                                       SeparationRule rule = SeparationRule::Chebyshev);

}  // namespace rarity
