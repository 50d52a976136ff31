#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rarity {

/// Raised when a shape placement does not fit the image.
class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for malformed input files or unsupported formats.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Origin {
    int x = 0;
    int y = 0;

    friend bool operator==(const Origin&, const Origin&) = default;
};

/// Chebyshev distance between two origins.
inline int chebyshev(Origin a, Origin b) {
    const int dx = a.x > b.x ? a.x - b.x : b.x - a.x;
    const int dy = a.y > b.y ? a.y - b.y : b.y - a.y;
    return dx > dy ? dx : dy;
}

/// Grayscale intensity field, row-major. Values are finite; loaders
/// normalize to [0,1].
class Image {
public:
    Image() = default;
    Image(int width, int height, double fill = 0.0);
    Image(int width, int height, std::vector<double> data);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }

    double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    double& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    /// Copy with transposed axes.
    Image transposed() const;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

/// Offset of a support pixel inside the shape's bounding box.
struct Offset {
    int dx = 0;
    int dy = 0;
};

/// How two placements of the same shape are judged non-overlapping.
enum class SeparationRule {
    /// max(|dx|, |dy|) >= max(w_s, h_s)
    Chebyshev,
    /// sqrt(dx^2 + dy^2) > bounding-box diagonal
    Euclidean,
};

/// Binary characteristic function over a tight bounding box.
class Shape {
public:
    /// Full w x h rectangle.
    static Shape rectangle(int width, int height);
    static Shape square(int side) { return rectangle(side, side); }

    /// Mask given row-major; nonzero entries are support. Throws
    /// std::invalid_argument if the box is not tight or the support has
    /// fewer than two pixels.
    Shape(int width, int height, std::vector<std::uint8_t> mask);

    int width() const { return width_; }
    int height() const { return height_; }
    bool contains(int dx, int dy) const {
        return mask_[static_cast<std::size_t>(dy) * width_ + dx] != 0;
    }
    std::size_t support_size() const { return support_.size(); }

    /// Support pixels in canonical (row-major) order.
    std::span<const Offset> support() const { return support_; }

    /// Bounding-box diagonal.
    double diameter() const;

    /// Largest side of the bounding box.
    int side() const { return width_ > height_ ? width_ : height_; }

    bool is_full_rectangle() const { return support_.size() == mask_.size(); }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> mask_;
    std::vector<Offset> support_;
};

/// The set of origins at which a shape fits entirely inside an image.
struct OriginRegion {
    int width = 0;   ///< number of valid x positions
    int height = 0;  ///< number of valid y positions

    OriginRegion(const Image& image, const Shape& shape);
    OriginRegion(int w, int h) : width(w), height(h) {}

    std::size_t count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    bool empty() const { return width <= 0 || height <= 0; }
    bool contains(Origin r) const { return r.x >= 0 && r.y >= 0 && r.x < width && r.y < height; }

    std::size_t index(Origin r) const { return static_cast<std::size_t>(r.y) * width + r.x; }
    Origin origin(std::size_t i) const {
        return {static_cast<int>(i % width), static_cast<int>(i / width)};
    }

    friend bool operator==(const OriginRegion&, const OriginRegion&) = default;
};

struct Block {
    std::vector<double> values;
    Origin origin;
};

enum class Norm { L2, L1 };

/// Pixels of `image` under `shape` placed at `r`, in canonical order.
/// Throws GeometryError when r lies outside the origin region.
Block cut_block(const Image& image, const Shape& shape, Origin r);

/// Throws std::invalid_argument on length mismatch.
double block_distance(std::span<const double> a, std::span<const double> b, Norm norm = Norm::L2);
inline double block_distance(const Block& a, const Block& b, Norm norm = Norm::L2) {
    return block_distance(a.values, b.values, norm);
}

bool origins_disjoint(Origin r, Origin r2, const Shape& shape,
                      SeparationRule rule = SeparationRule::Chebyshev);

Norm parse_norm(const std::string& name);
SeparationRule parse_separation(const std::string& name);

}  // namespace rarity
