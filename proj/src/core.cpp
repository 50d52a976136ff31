#include "rarity/core.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace rarity {

Image::Image(int width, int height, double fill)
    : width_(width), height_(height) {
    if (width < 1 || height < 1) {
        throw std::invalid_argument("image dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill);
}

Image::Image(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1) {
        throw std::invalid_argument("image dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(width) * height) {
        throw std::invalid_argument("image data length does not match width x height");
    }
    for (double v : data_) {
        if (!std::isfinite(v)) throw std::invalid_argument("image intensities must be finite");
    }
}

Image Image::transposed() const {
    Image t(height_, width_);
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) t.at(y, x) = at(x, y);
    return t;
}

Shape Shape::rectangle(int width, int height) {
    if (width < 1 || height < 1) throw std::invalid_argument("shape dimensions must be positive");
    return Shape(width, height,
                 std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 1));
}

Shape::Shape(int width, int height, std::vector<std::uint8_t> mask)
    : width_(width), height_(height), mask_(std::move(mask)) {
    if (width < 1 || height < 1) throw std::invalid_argument("shape dimensions must be positive");
    if (mask_.size() != static_cast<std::size_t>(width) * height) {
        throw std::invalid_argument("mask length does not match width x height");
    }
    bool top = false, bottom = false, left = false, right = false;
    for (int dy = 0; dy < height; ++dy) {
        for (int dx = 0; dx < width; ++dx) {
            auto& m = mask_[static_cast<std::size_t>(dy) * width + dx];
            if (m == 0) continue;
            m = 1;
            support_.push_back({dx, dy});
            top |= dy == 0;
            bottom |= dy == height - 1;
            left |= dx == 0;
            right |= dx == width - 1;
        }
    }
    if (support_.size() < 2) {
        throw std::invalid_argument("shape support must contain at least two pixels");
    }
    if (!(top && bottom && left && right)) {
        throw std::invalid_argument("shape mask bounding box is not tight");
    }
}

double Shape::diameter() const {
    return std::hypot(static_cast<double>(width_), static_cast<double>(height_));
}

OriginRegion::OriginRegion(const Image& image, const Shape& shape)
    : width(image.width() - shape.width() + 1), height(image.height() - shape.height() + 1) {
    if (width < 0) width = 0;
    if (height < 0) height = 0;
}

Block cut_block(const Image& image, const Shape& shape, Origin r) {
    const OriginRegion region(image, shape);
    if (!region.contains(r)) {
        std::ostringstream msg;
        msg << "origin (" << r.x << ", " << r.y << ") outside valid region "
            << region.width << "x" << region.height;
        throw GeometryError(msg.str());
    }
    Block b;
    b.origin = r;
    b.values.reserve(shape.support_size());
    for (const Offset& o : shape.support()) b.values.push_back(image.at(r.x + o.dx, r.y + o.dy));
    return b;
}

double block_distance(std::span<const double> a, std::span<const double> b, Norm norm) {
    if (a.size() != b.size()) throw std::invalid_argument("block lengths differ");
    double acc = 0.0;
    if (norm == Norm::L2) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            acc += d * d;
        }
        return std::sqrt(acc);
    }
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc;
}

bool origins_disjoint(Origin r, Origin r2, const Shape& shape, SeparationRule rule) {
    const long dx = r.x - r2.x;
    const long dy = r.y - r2.y;
    if (rule == SeparationRule::Chebyshev) return chebyshev(r, r2) >= shape.side();
    return std::sqrt(static_cast<double>(dx * dx + dy * dy)) > shape.diameter();
}

Norm parse_norm(const std::string& name) {
    if (name == "l2" || name == "L2") return Norm::L2;
    if (name == "l1" || name == "L1") return Norm::L1;
    throw std::invalid_argument("unknown norm '" + name + "'");
}

SeparationRule parse_separation(const std::string& name) {
    if (name == "chebyshev") return SeparationRule::Chebyshev;
    if (name == "euclidean") return SeparationRule::Euclidean;
    throw std::invalid_argument("unknown separation rule '" + name + "'");
}

}  // namespace rarity
