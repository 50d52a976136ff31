#include "rarity/synth.hpp"

#include <algorithm>
#include <random>

namespace rarity::synth {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

Generated generate(const SynthSpec& spec) {
    if (spec.width < 1 || spec.height < 1) throw std::invalid_argument("synthetic image dimensions must be positive");
    for (const Plant& p : spec.plants) {
        if (p.width < 1 || p.height < 1 || p.origin.x < 0 || p.origin.y < 0 ||
            p.origin.x + p.width > spec.width || p.origin.y + p.height > spec.height) {
            throw std::invalid_argument("plant at (" + std::to_string(p.origin.x) + ", " +
                                        std::to_string(p.origin.y) + ") size " +
                                        std::to_string(p.width) + "x" + std::to_string(p.height) +
                                        " does not fit inside the image");
        }
    }

    std::mt19937_64 rng(spec.seed);
    Image image(spec.width, spec.height);
    std::visit(Overloaded{
                   [&](const GaussianNoise& g) {
                       std::normal_distribution<double> normal(g.mean, g.sd);
                       for (double& v : image.data()) v = normal(rng);
                   },
                   [&](const Periodic& p) {
                       if (p.period < 1) throw std::invalid_argument("period must be positive");
                       std::vector<double> tile = p.tile;
                       const std::size_t cells = static_cast<std::size_t>(p.period) * p.period;
                       if (tile.empty()) {
                           std::uniform_real_distribution<double> uniform(0.0, 1.0);
                           tile.resize(cells);
                           for (double& v : tile) v = uniform(rng);
                       }
                       if (tile.size() != cells) throw std::invalid_argument("tile must hold period x period values");
                       for (int y = 0; y < spec.height; ++y)
                           for (int x = 0; x < spec.width; ++x)
                               image.at(x, y) = tile[static_cast<std::size_t>(y % p.period) * p.period + x % p.period];
                   },
                   [&](const Constant& c) { std::fill(image.data().begin(), image.data().end(), c.value); },
               },
               spec.background);

    Generated out;
    for (const Plant& p : spec.plants) {
        std::visit(Overloaded{
                       [&](const GaussianNoise& g) {
                           std::normal_distribution<double> normal(g.mean, g.sd);
                           for (int y = 0; y < p.height; ++y)
                               for (int x = 0; x < p.width; ++x)
                                   image.at(p.origin.x + x, p.origin.y + y) = normal(rng);
                       },
                       [&](const InvertedTile&) {
                           for (int y = 0; y < p.height; ++y)
                               for (int x = 0; x < p.width; ++x) {
                                   double& v = image.at(p.origin.x + x, p.origin.y + y);
                                   v = 1.0 - v;
                               }
                       },
                       [&](const Checker& c) {
                           const int cell = std::max(1, c.cell);
                           for (int y = 0; y < p.height; ++y)
                               for (int x = 0; x < p.width; ++x)
                                   image.at(p.origin.x + x, p.origin.y + y) =
                                       ((x / cell + y / cell) % 2 == 0) ? c.high : c.low;
                       },
                   },
                   p.patch);
        out.truth.push_back(p.origin);
    }
    if (spec.clamp) {
        for (double& v : image.data()) v = std::clamp(v, 0.0, 1.0);
    }
    out.image = std::move(image);
    return out;
}

namespace {

using nlohmann::json;

GaussianNoise gaussian_from(const json& j) {
    return {j.value("mean", 0.5), j.value("sd", 0.1)};
}

Background background_from(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "gaussian") return gaussian_from(j);
    if (type == "periodic") {
        Periodic p;
        p.period = j.value("period", 8);
        if (j.contains("tile")) p.tile = j.at("tile").get<std::vector<double>>();
        return p;
    }
    if (type == "constant") return Constant{j.value("value", 0.5)};
    throw std::invalid_argument("unknown background type '" + type + "'");
}

Patch patch_from(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "gaussian") return gaussian_from(j);
    if (type == "inverted_tile") return InvertedTile{};
    if (type == "checker") return Checker{j.value("low", 0.2), j.value("high", 0.8), j.value("cell", 1)};
    throw std::invalid_argument("unknown patch type '" + type + "'");
}

Plant plant_from(const json& j) {
    Plant p;
    p.origin = {j.at("x").get<int>(), j.at("y").get<int>()};
    p.width = j.value("width", 8);
    p.height = j.value("height", p.width);
    if (j.contains("patch")) p.patch = patch_from(j.at("patch"));
    return p;
}

json gaussian_to(const GaussianNoise& g) {
    return {{"type", "gaussian"}, {"mean", g.mean}, {"sd", g.sd}};
}

}  // namespace

SynthSpec spec_from_json(const json& j) {
    try {
        SynthSpec spec;
        spec.width = j.at("width").get<int>();
        spec.height = j.at("height").get<int>();
        spec.seed = j.value("seed", std::uint64_t{0});
        spec.clamp = j.value("clamp", true);
        if (j.contains("background")) spec.background = background_from(j.at("background"));
        if (j.contains("plant") && !j.at("plant").is_null()) spec.plants.push_back(plant_from(j.at("plant")));
        if (j.contains("plants"))
            for (const auto& p : j.at("plants")) spec.plants.push_back(plant_from(p));
        return spec;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("invalid synth spec: ") + e.what());
    }
}

json spec_to_json(const SynthSpec& spec) {
    json j;
    j["width"] = spec.width;
    j["height"] = spec.height;
    j["seed"] = spec.seed;
    j["clamp"] = spec.clamp;
    j["background"] = std::visit(
        Overloaded{
            [](const GaussianNoise& g) { return gaussian_to(g); },
            [](const Periodic& p) {
                json b = {{"type", "periodic"}, {"period", p.period}};
                if (!p.tile.empty()) b["tile"] = p.tile;
                return b;
            },
            [](const Constant& c) { return json{{"type", "constant"}, {"value", c.value}}; },
        },
        spec.background);
    json plants = json::array();
    for (const Plant& p : spec.plants) {
        json patch = std::visit(
            Overloaded{
                [](const GaussianNoise& g) { return gaussian_to(g); },
                [](const InvertedTile&) { return json{{"type", "inverted_tile"}}; },
                [](const Checker& c) {
                    return json{{"type", "checker"}, {"low", c.low}, {"high", c.high}, {"cell", c.cell}};
                },
            },
            p.patch);
        plants.push_back({{"x", p.origin.x}, {"y", p.origin.y}, {"width", p.width},
                          {"height", p.height}, {"patch", patch}});
    }
    j["plants"] = plants;
    return j;
}

}  // namespace rarity::synth
