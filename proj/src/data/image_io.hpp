#pragma once

#include "core/tensor.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmgan {

struct IOError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// 8-bit interleaved RGB
void write_png_rgb8(const std::string& path, int64_t width, int64_t height,
                    const std::vector<uint8_t>& rgb);
std::vector<uint8_t> read_png_rgb8(const std::string& path, int64_t& width,
                                   int64_t& height);

// 16-bit single-channel
void write_png_gray16(const std::string& path, int64_t width, int64_t height,
                      const std::vector<uint16_t>& gray);
std::vector<uint16_t> read_png_gray16(const std::string& path, int64_t& width,
                                      int64_t& height);

// [C,H,W] -> [C,oh,ow], bilinear with half-pixel centers
Tensor resize_bilinear(const Tensor& img, int64_t oh, int64_t ow);

} // namespace mmgan
