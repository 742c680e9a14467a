#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdloc/grid.hpp"
#include "crowdloc/labels.hpp"

// PNG round-trips. Images are 8-bit grayscale mapped to [0,1]; label maps are
// 16-bit grayscale holding raw instance ids; overlays are 8-bit RGB.

namespace crowdloc {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_fail(const std::string& what, const std::string& path) {
    throw std::runtime_error(what + ": " + path);
}

}  // namespace detail

inline void write_png_gray8(const std::string& path, const Grid& img) {
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) detail::png_fail("cannot open for writing", path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        detail::png_fail("png write failed", path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.w, img.h, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<uint8_t> row(img.w);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            double v = img.at(y, x);
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            row[x] = static_cast<uint8_t>(v * 255.0 + 0.5);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline Grid read_png_gray8(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) detail::png_fail("cannot open", path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        detail::png_fail("png read failed", path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    if (png_get_color_type(png, info) & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray(png, 1, -1, -1);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    Grid img(h, w);
    std::vector<uint8_t> row(png_get_rowbytes(png, info));
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x) img.at(y, x) = row[x] / 255.0;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void write_png_gray16(const std::string& path, const LabelMap& map) {
    for (int32_t v : map.v)
        if (v < 0 || v > 65535)
            throw std::invalid_argument("write_png_gray16: label " + std::to_string(v) +
                                        " out of 16-bit range");
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) detail::png_fail("cannot open for writing", path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        detail::png_fail("png write failed", path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, map.w, map.h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<uint8_t> row(static_cast<size_t>(map.w) * 2);
    for (int y = 0; y < map.h; ++y) {
        for (int x = 0; x < map.w; ++x) {
            const uint16_t v = static_cast<uint16_t>(map.at(y, x));
            row[2 * x] = static_cast<uint8_t>(v >> 8);  // network byte order
            row[2 * x + 1] = static_cast<uint8_t>(v & 0xff);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline LabelMap read_png_gray16(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) detail::png_fail("cannot open", path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        detail::png_fail("png read failed", path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    if (png_get_bit_depth(png, info) != 16 ||
        png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        detail::png_fail("expected 16-bit grayscale", path);
    }
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    LabelMap map(h, w);
    std::vector<uint8_t> row(png_get_rowbytes(png, info));
    int32_t top = 0;
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x) {
            const int32_t v = (static_cast<int32_t>(row[2 * x]) << 8) | row[2 * x + 1];
            map.at(y, x) = v;
            top = std::max(top, v);
        }
    }
    map.count = top;
    png_destroy_read_struct(&png, &info, nullptr);
    return map;
}

// 8-bit RGB, channels interleaved per pixel, values in [0,1].
struct RgbImage {
    int h = 0, w = 0;
    std::vector<double> v;  // h*w*3
    RgbImage() = default;
    RgbImage(int height, int width) : h(height), w(width), v(static_cast<size_t>(height) * width * 3, 0.0) {}
    double* px(int y, int x) { return v.data() + (static_cast<size_t>(y) * w + x) * 3; }
    const double* px(int y, int x) const { return v.data() + (static_cast<size_t>(y) * w + x) * 3; }
};

inline void write_png_rgb8(const std::string& path, const RgbImage& img) {
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) detail::png_fail("cannot open for writing", path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        detail::png_fail("png write failed", path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.w, img.h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<uint8_t> row(static_cast<size_t>(img.w) * 3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = img.px(y, x)[c];
                v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                row[3 * x + c] = static_cast<uint8_t>(v * 255.0 + 0.5);
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace crowdloc
