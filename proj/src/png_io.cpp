#include "simip/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "simip/errors.hpp"

namespace simip {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open(const std::filesystem::path& p, const char* mode) {
    FilePtr f(std::fopen(p.c_str(), mode));
    if (!f) throw Error(ErrorKind::Io, "cannot open " + p.string());
    return f;
}

void write_rows(const std::filesystem::path& path, int width, int height, int color_type,
                const std::vector<png_bytep>& rows) {
    FilePtr f = open(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::Io, "libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::Io, "failed writing " + path.string());
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

struct Decoded {
    int width = 0, height = 0, channels = 0;
    std::vector<std::uint8_t> pixels;  // interleaved, 8-bit
};

Decoded read_png(const std::filesystem::path& path) {
    FilePtr f = open(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::Io, "libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::Io, "failed reading " + path.string());
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    Decoded d;
    d.width = int(png_get_image_width(png, info));
    d.height = int(png_get_image_height(png, info));
    d.channels = int(png_get_channels(png, info));
    std::size_t stride = png_get_rowbytes(png, info);
    d.pixels.resize(stride * std::size_t(d.height));
    std::vector<png_bytep> rows(std::size_t(d.height));
    for (int y = 0; y < d.height; ++y) rows[std::size_t(y)] = d.pixels.data() + stride * std::size_t(y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return d;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Mask& mask) {
    std::vector<std::uint8_t> buf(std::size_t(mask.width()) * mask.height());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = mask.data()[i] ? 255 : 0;
    std::vector<png_bytep> rows(std::size_t(mask.height()));
    for (int y = 0; y < mask.height(); ++y) rows[std::size_t(y)] = buf.data() + std::size_t(y) * mask.width();
    write_rows(path, mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, rows);
}

void write_png(const std::filesystem::path& path, const Image& image) {
    const int w = image.width(), h = image.height();
    std::vector<std::uint8_t> buf(std::size_t(w) * h * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) buf[(std::size_t(y) * w + x) * 3 + c] = image.at(c, x, y);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[std::size_t(y)] = buf.data() + std::size_t(y) * w * 3;
    write_rows(path, w, h, PNG_COLOR_TYPE_RGB, rows);
}

Mask read_mask_png(const std::filesystem::path& path) {
    Decoded d = read_png(path);
    Mask m(d.width, d.height);
    std::size_t stride = std::size_t(d.width) * d.channels;
    for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < d.width; ++x) m.at(x, y) = d.pixels[std::size_t(y) * stride + std::size_t(x) * d.channels] != 0;
    return m;
}

Image read_image_png(const std::filesystem::path& path) {
    Decoded d = read_png(path);
    Image img(d.width, d.height);
    std::size_t stride = std::size_t(d.width) * d.channels;
    for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < d.width; ++x) {
            const std::uint8_t* p = d.pixels.data() + std::size_t(y) * stride + std::size_t(x) * d.channels;
            if (d.channels >= 3)
                img.set_pixel(x, y, {p[0], p[1], p[2]});
            else
                img.set_pixel(x, y, {p[0], p[0], p[0]});
        }
    return img;
}

}  // namespace simip
