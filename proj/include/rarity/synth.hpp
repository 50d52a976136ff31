#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "rarity/core.hpp"

namespace rarity::synth {

struct GaussianNoise {
    double mean = 0.5;
    double sd = 0.1;
};

/// Tile repeated with the given period. An empty tile is drawn uniformly
/// from [0, 1] using the spec seed.
struct Periodic {
    int period = 8;
    std::vector<double> tile;  ///< period x period, row-major
};

struct Constant {
    double value = 0.5;
};

using Background = std::variant<GaussianNoise, Periodic, Constant>;

struct Checker {
    double low = 0.2;
    double high = 0.8;
    int cell = 1;
};

/// 1 - background under the patch.
struct InvertedTile {};

using Patch = std::variant<GaussianNoise, InvertedTile, Checker>;

struct Plant {
    Origin origin;
    int width = 8;
    int height = 8;
    Patch patch = Checker{};
};

struct SynthSpec {
    int width = 64;
    int height = 64;
    Background background = GaussianNoise{};
    std::vector<Plant> plants;
    std::uint64_t seed = 0;
    bool clamp = true;
};

struct Generated {
    Image image;
    std::vector<Origin> truth;  ///< plant origins, in spec order
};

/// Throws std::invalid_argument for invalid dimensions or plants outside
/// the image.
Generated generate(const SynthSpec& spec);

/// Parses the JSON form. Throws std::invalid_argument on schema errors.
SynthSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const SynthSpec& spec);

}  // namespace rarity::synth
