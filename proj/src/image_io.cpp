#include "garmentgen/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace garmentgen {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

int disk_channels(PngKind kind) { return kind == PngKind::image || kind == PngKind::dense ? 3 : 1; }
int tensor_channels(PngKind kind) {
    switch (kind) {
        case PngKind::image: return 3;
        case PngKind::dense: return 2;
        default: return 1;
    }
}

std::uint8_t to_byte(double v, PngKind kind) {
    double x = 0.0;
    switch (kind) {
        case PngKind::image: x = (std::clamp(v, -1.0, 1.0) + 1.0) / 2.0 * 255.0; break;
        case PngKind::dense: x = std::clamp(v, 0.0, 1.0) * 255.0; break;
        case PngKind::mask: x = v > 0.5 ? 255.0 : 0.0; break;
        case PngKind::parse: x = std::clamp(v, 0.0, 255.0); break;
    }
    return static_cast<std::uint8_t>(std::lround(x));
}

double from_byte(std::uint8_t b, PngKind kind) {
    switch (kind) {
        case PngKind::image: return b / 255.0 * 2.0 - 1.0;
        case PngKind::dense: return b / 255.0;
        case PngKind::mask: return b >= 128 ? 1.0 : 0.0;
        case PngKind::parse: return b;
    }
    return 0.0;
}

}  // namespace

void write_png(const std::string& path, const Tensor& t, PngKind kind) {
    if (t.rank() != 3 || t.dim(0) != tensor_channels(kind))
        throw ShapeError("write_png: unexpected shape " + shape_str(t.shape()));
    const int h = t.dim(1), w = t.dim(2), dc = disk_channels(kind), tc = t.dim(0);
    std::vector<std::uint8_t> rows(static_cast<std::size_t>(h) * w * dc, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < tc; ++c) rows[(static_cast<std::size_t>(y) * w + x) * dc + c] = to_byte(t.at(c, y, x), kind);

    File f(std::fopen(path.c_str(), "wb"));
    if (!f) throw Error("cannot write '" + path + "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng failed writing '" + path + "'");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 dc == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h; ++y) png_write_row(png, rows.data() + static_cast<std::size_t>(y) * w * dc);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Tensor read_png(const std::string& path, PngKind kind) {
    File f(std::fopen(path.c_str(), "rb"));
    if (!f) throw Error("cannot open '" + path + "'");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("libpng init failed");
    }
    std::vector<std::uint8_t> rows;
    int h = 0, w = 0, dc = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("'" + path + "' is not a readable PNG");
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_packing(png);
    png_set_palette_to_rgb(png);
    png_read_update_info(png, info);
    w = static_cast<int>(png_get_image_width(png, info));
    h = static_cast<int>(png_get_image_height(png, info));
    dc = png_get_channels(png, info);
    rows.resize(static_cast<std::size_t>(h) * w * dc);
    for (int y = 0; y < h; ++y) png_read_row(png, rows.data() + static_cast<std::size_t>(y) * w * dc, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    if (dc != disk_channels(kind)) throw ShapeError("'" + path + "' has " + std::to_string(dc) + " channels");
    const int tc = tensor_channels(kind);
    Tensor t({tc, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < tc; ++c) t.at(c, y, x) = from_byte(rows[(static_cast<std::size_t>(y) * w + x) * dc + c], kind);
    return t;
}

Tensor quantize(const Tensor& t, PngKind kind) {
    Tensor q = t;
    for (double& v : q.vec()) v = from_byte(to_byte(v, kind), kind);
    return q;
}

}  // namespace garmentgen
