#include "data/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace mmgan {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

void write_png(const std::string& path, int64_t width, int64_t height,
               int bit_depth, int color_type, const std::vector<png_bytep>& rows) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IOError("cannot open for writing: " + path);
    PngWriter w;
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!w.png) throw IOError("png_create_write_struct failed");
    w.info = png_create_info_struct(w.png);
    if (!w.info) throw IOError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(w.png))) throw IOError("png write failed: " + path);
    png_init_io(w.png, f.get());
    png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(width),
                 static_cast<png_uint_32>(height), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    if (bit_depth == 16) png_set_swap(w.png);   // little-endian in memory
    png_write_image(w.png, const_cast<png_bytepp>(rows.data()));
    png_write_end(w.png, nullptr);
}

void read_png_header(PngReader& r, FILE* f, const std::string& path,
                     int64_t& width, int64_t& height, int& bit_depth, int& color_type) {
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw IOError("png_create_read_struct failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw IOError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(r.png))) throw IOError("png read failed: " + path);
    png_init_io(r.png, f);
    png_read_info(r.png, r.info);
    width = png_get_image_width(r.png, r.info);
    height = png_get_image_height(r.png, r.info);
    bit_depth = png_get_bit_depth(r.png, r.info);
    color_type = png_get_color_type(r.png, r.info);
}

} // namespace

void write_png_rgb8(const std::string& path, int64_t width, int64_t height,
                    const std::vector<uint8_t>& rgb) {
    if (static_cast<int64_t>(rgb.size()) != width * height * 3)
        throw IOError("write_png_rgb8: buffer size mismatch for " + path);
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    for (int64_t y = 0; y < height; ++y)
        rows[static_cast<size_t>(y)] =
            const_cast<png_bytep>(rgb.data() + y * width * 3);
    write_png(path, width, height, 8, PNG_COLOR_TYPE_RGB, rows);
}

std::vector<uint8_t> read_png_rgb8(const std::string& path, int64_t& width,
                                   int64_t& height) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IOError("cannot open: " + path);
    PngReader r;
    int bit_depth = 0, color_type = 0;
    read_png_header(r, f.get(), path, width, height, bit_depth, color_type);
    if (setjmp(png_jmpbuf(r.png))) throw IOError("png read failed: " + path);
    if (bit_depth == 16) png_set_strip_16(r.png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(r.png);
    png_set_strip_alpha(r.png);
    png_read_update_info(r.png, r.info);

    std::vector<uint8_t> out(static_cast<size_t>(width * height * 3));
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    for (int64_t y = 0; y < height; ++y)
        rows[static_cast<size_t>(y)] = out.data() + y * width * 3;
    png_read_image(r.png, rows.data());
    return out;
}

void write_png_gray16(const std::string& path, int64_t width, int64_t height,
                      const std::vector<uint16_t>& gray) {
    if (static_cast<int64_t>(gray.size()) != width * height)
        throw IOError("write_png_gray16: buffer size mismatch for " + path);
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    for (int64_t y = 0; y < height; ++y)
        rows[static_cast<size_t>(y)] = const_cast<png_bytep>(
            reinterpret_cast<const png_byte*>(gray.data() + y * width));
    write_png(path, width, height, 16, PNG_COLOR_TYPE_GRAY, rows);
}

std::vector<uint16_t> read_png_gray16(const std::string& path, int64_t& width,
                                      int64_t& height) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IOError("cannot open: " + path);
    PngReader r;
    int bit_depth = 0, color_type = 0;
    read_png_header(r, f.get(), path, width, height, bit_depth, color_type);
    if (setjmp(png_jmpbuf(r.png))) throw IOError("png read failed: " + path);
    if (color_type != PNG_COLOR_TYPE_GRAY)
        throw IOError("expected grayscale png: " + path);
    if (bit_depth != 16)
        throw IOError("expected 16-bit png: " + path);
    png_set_swap(r.png);
    png_read_update_info(r.png, r.info);

    std::vector<uint16_t> out(static_cast<size_t>(width * height));
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    for (int64_t y = 0; y < height; ++y)
        rows[static_cast<size_t>(y)] =
            reinterpret_cast<png_byte*>(out.data() + y * width);
    png_read_image(r.png, rows.data());
    return out;
}

Tensor resize_bilinear(const Tensor& img, int64_t oh, int64_t ow) {
    if (img.ndim() != 3)
        throw std::invalid_argument("resize_bilinear: [C,H,W] tensor expected");
    int64_t C = img.dim(0), H = img.dim(1), W = img.dim(2);
    if (oh == H && ow == W) return img.clone();
    Tensor out = Tensor::zeros({C, oh, ow});
    double sy = static_cast<double>(H) / static_cast<double>(oh);
    double sx = static_cast<double>(W) / static_cast<double>(ow);
    for (int64_t c = 0; c < C; ++c) {
        const double* src = img.data() + c * H * W;
        double* dst = out.data() + c * oh * ow;
        for (int64_t y = 0; y < oh; ++y) {
            double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
            int64_t y0 = static_cast<int64_t>(std::floor(fy));
            double wy = fy - static_cast<double>(y0);
            int64_t y0c = std::clamp<int64_t>(y0, 0, H - 1);
            int64_t y1c = std::clamp<int64_t>(y0 + 1, 0, H - 1);
            for (int64_t x = 0; x < ow; ++x) {
                double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
                int64_t x0 = static_cast<int64_t>(std::floor(fx));
                double wx = fx - static_cast<double>(x0);
                int64_t x0c = std::clamp<int64_t>(x0, 0, W - 1);
                int64_t x1c = std::clamp<int64_t>(x0 + 1, 0, W - 1);
                dst[y * ow + x] =
                    (1 - wy) * ((1 - wx) * src[y0c * W + x0c] + wx * src[y0c * W + x1c]) +
                    wy * ((1 - wx) * src[y1c * W + x0c] + wx * src[y1c * W + x1c]);
            }
        }
    }
    return out;
}

} // namespace mmgan
