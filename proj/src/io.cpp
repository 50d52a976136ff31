#include "rarity/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace rarity::io {

namespace {

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class PnmCursor {
public:
    PnmCursor(const std::vector<unsigned char>& bytes, const std::string& path)
        : bytes_(bytes), path_(path) {}

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const unsigned char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
                ++pos_;
            } else {
                return;
            }
        }
    }

    long number() {
        skip_space_and_comments();
        long value = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
            value = value * 10 + (bytes_[pos_++] - '0');
            if (value > 1000000000L) throw InputError(path_ + ": header value too large");
            ++digits;
        }
        if (digits == 0) throw InputError(path_ + ": malformed PGM header");
        return value;
    }

    std::size_t& pos() { return pos_; }

private:
    const std::vector<unsigned char>& bytes_;
    const std::string& path_;
    std::size_t pos_ = 0;
};

bool has_png_signature(const std::vector<unsigned char>& bytes) {
    static constexpr std::array<unsigned char, 8> sig{0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    return bytes.size() >= sig.size() && std::equal(sig.begin(), sig.end(), bytes.begin());
}

GrayRaster parse_pgm(const std::vector<unsigned char>& bytes, const std::string& path) {
    if (bytes.size() < 2 || bytes[0] != 'P') throw InputError(path + ": not a PGM file");
    if (bytes[1] != '5') throw InputError(path + ": only binary PGM (P5) is supported");
    PnmCursor cur(bytes, path);
    cur.pos() = 2;
    GrayRaster r;
    r.width = static_cast<int>(cur.number());
    r.height = static_cast<int>(cur.number());
    r.maxval = static_cast<int>(cur.number());
    if (r.width < 1 || r.height < 1) throw InputError(path + ": PGM dimensions must be positive");
    if (r.maxval < 1 || r.maxval > 65535) throw InputError(path + ": PGM maxval out of range");
    // Exactly one whitespace byte separates the header from the raster.
    if (cur.pos() >= bytes.size()) throw InputError(path + ": truncated PGM");
    ++cur.pos();
    const std::size_t count = static_cast<std::size_t>(r.width) * r.height;
    const std::size_t bpp = r.maxval > 255 ? 2 : 1;
    if (bytes.size() - cur.pos() < count * bpp) throw InputError(path + ": truncated PGM raster");
    r.pixels.resize(count);
    const unsigned char* p = bytes.data() + cur.pos();
    for (std::size_t i = 0; i < count; ++i) {
        r.pixels[i] = bpp == 1 ? p[i] : static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]);
        if (r.pixels[i] > r.maxval) throw InputError(path + ": sample exceeds maxval");
    }
    return r;
}

struct PngMemoryReader {
    const unsigned char* data;
    std::size_t size;
    std::size_t pos;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t n) {
    auto* src = static_cast<PngMemoryReader*>(png_get_io_ptr(png));
    if (src->size - src->pos < n) png_error(png, "unexpected end of PNG data");
    std::memcpy(out, src->data + src->pos, n);
    src->pos += n;
}

// Returns an error message or an empty string. Only trivially destructible
// locals live across setjmp.
std::string decode_png(const std::vector<unsigned char>& bytes, GrayRaster& out) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) return "cannot allocate PNG reader";
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return "cannot allocate PNG info";
    }
    png_bytep volatile raster = nullptr;
    png_bytepp volatile rows = nullptr;
    const char* volatile failure = nullptr;
    PngMemoryReader src{bytes.data(), bytes.size(), 0};
    if (setjmp(png_jmpbuf(png))) {
        std::free(rows);
        std::free(raster);
        png_destroy_read_struct(&png, &info, nullptr);
        return failure ? failure : "corrupt PNG data";
    }
    png_set_read_fn(png, &src, png_read_from_memory);
    png_read_info(png, info);
    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY) {
        failure = (color & PNG_COLOR_MASK_COLOR) ? "color PNG is not supported; convert to grayscale"
                                                 : "grayscale PNG with alpha is not supported";
        png_error(png, failure);
    }
    if (depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
        depth = 8;
    }
    png_read_update_info(png, info);
    const png_size_t stride = png_get_rowbytes(png, info);
    raster = static_cast<png_bytep>(std::malloc(stride * height));
    rows = static_cast<png_bytepp>(std::malloc(sizeof(png_bytep) * height));
    if (!raster || !rows) {
        failure = "out of memory decoding PNG";
        png_error(png, failure);
    }
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = raster + y * stride;
    png_read_image(png, rows);
    png_read_end(png, nullptr);

    out.width = static_cast<int>(width);
    out.height = static_cast<int>(height);
    out.maxval = depth == 16 ? 65535 : 255;
    out.pixels.resize(static_cast<std::size_t>(width) * height);
    for (png_uint_32 y = 0; y < height; ++y) {
        const png_bytep row = rows[y];
        for (png_uint_32 x = 0; x < width; ++x) {
            out.pixels[static_cast<std::size_t>(y) * width + x] =
                depth == 16 ? static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1]) : row[x];
        }
    }
    std::free(rows);
    std::free(raster);
    png_destroy_read_struct(&png, &info, nullptr);
    return {};
}

}  // namespace

GrayRaster read_pgm(const std::string& path) { return parse_pgm(slurp(path), path); }

GrayRaster read_png(const std::string& path) {
    const auto bytes = slurp(path);
    if (!has_png_signature(bytes)) throw InputError(path + ": not a PNG file");
    GrayRaster r;
    if (auto err = decode_png(bytes, r); !err.empty()) throw InputError(path + ": " + err);
    return r;
}

Image read_image(const std::string& path) {
    const auto bytes = slurp(path);
    GrayRaster r;
    if (has_png_signature(bytes)) {
        if (auto err = decode_png(bytes, r); !err.empty()) throw InputError(path + ": " + err);
    } else if (bytes.size() >= 2 && bytes[0] == 'P') {
        r = parse_pgm(bytes, path);
    } else {
        throw InputError(path + ": unrecognized image format (expected PGM P5 or PNG)");
    }
    std::vector<double> data(r.pixels.size());
    const double scale = 1.0 / r.maxval;
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = r.pixels[i] * scale;
    return Image(r.width, r.height, std::move(data));
}

void write_pgm(const std::string& path, const GrayRaster& raster) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << "P5\n" << raster.width << ' ' << raster.height << '\n' << raster.maxval << '\n';
    if (raster.maxval > 255) {
        for (std::uint16_t v : raster.pixels) {
            const char be[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xFF)};
            out.write(be, 2);
        }
    } else {
        for (std::uint16_t v : raster.pixels) out.put(static_cast<char>(v));
    }
    if (!out) throw InputError("failed writing '" + path + "'");
}

void write_png(const std::string& path, const GrayRaster& raster) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw InputError("cannot write '" + path + "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw InputError("cannot allocate PNG writer");
    }
    const int depth = raster.maxval > 255 ? 16 : 8;
    const std::size_t stride = static_cast<std::size_t>(raster.width) * (depth / 8);
    png_bytep volatile row = static_cast<png_bytep>(std::malloc(stride));
    if (setjmp(png_jmpbuf(png))) {
        std::free(row);
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw InputError("failed writing '" + path + "'");
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, raster.width, raster.height, depth, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < raster.height; ++y) {
        for (int x = 0; x < raster.width; ++x) {
            const std::uint16_t v = raster.pixels[static_cast<std::size_t>(y) * raster.width + x];
            if (depth == 16) {
                row[2 * x] = static_cast<png_byte>(v >> 8);
                row[2 * x + 1] = static_cast<png_byte>(v & 0xFF);
            } else {
                row[x] = static_cast<png_byte>(v);
            }
        }
        png_write_row(png, row);
    }
    png_write_end(png, nullptr);
    std::free(row);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

Shape read_mask(const std::string& path) {
    const auto bytes = slurp(path);
    GrayRaster r;
    if (has_png_signature(bytes)) {
        if (auto err = decode_png(bytes, r); !err.empty()) throw InputError(path + ": " + err);
    } else {
        r = parse_pgm(bytes, path);
    }
    int x0 = r.width, y0 = r.height, x1 = -1, y1 = -1;
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x)
            if (r.pixels[static_cast<std::size_t>(y) * r.width + x] != 0) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    if (x1 < 0) throw InputError(path + ": mask has no support pixels");
    const int w = x1 - x0 + 1, h = y1 - y0 + 1;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            mask[static_cast<std::size_t>(y) * w + x] =
                r.pixels[static_cast<std::size_t>(y + y0) * r.width + x + x0] != 0;
    try {
        return Shape(w, h, std::move(mask));
    } catch (const std::invalid_argument& e) {
        throw InputError(path + ": " + e.what());
    }
}

GrayRaster render_heatmap(std::span<const double> values, int width, int height) {
    GrayRaster r;
    r.width = width;
    r.height = height;
    r.maxval = 255;
    r.pixels.assign(values.size(), 0);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) return r;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) continue;
        r.pixels[i] = static_cast<std::uint16_t>(std::lround(255.0 * (values[i] - lo) / (hi - lo)));
    }
    return r;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_raw_map(const std::string& path, std::span<const double> values, int width, int height) {
    if (values.size() != static_cast<std::size_t>(width) * height) {
        throw std::invalid_argument("raw map size mismatch");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out.write(kRawMagic, sizeof kRawMagic);
    put_u32(out, static_cast<std::uint32_t>(width));
    put_u32(out, static_cast<std::uint32_t>(height));
    for (double v : values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }
    if (!out) throw InputError("failed writing '" + path + "'");
}

RawMap read_raw_map(const std::string& path) {
    const auto bytes = slurp(path);
    if (bytes.size() < 16 || !std::equal(std::begin(kRawMagic), std::end(kRawMagic), bytes.begin())) {
        throw InputError(path + ": not a raw score map");
    }
    RawMap m;
    m.width = static_cast<int>(get_u32(bytes.data() + 8));
    m.height = static_cast<int>(get_u32(bytes.data() + 12));
    const std::size_t n = static_cast<std::size_t>(m.width) * m.height;
    if (bytes.size() != 16 + 8 * n) throw InputError(path + ": raw map length mismatch");
    m.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[16 + 8 * i + b]) << (8 * b);
        std::memcpy(&m.values[i], &bits, sizeof bits);
    }
    return m;
}

}  // namespace rarity::io
