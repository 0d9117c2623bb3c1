#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace deltamask {

/// 8-bit grayscale PNG used as a portable byte-array container.
/// The payload is laid out row-major in a ceil(sqrt(n)) wide image and
/// zero-padded to fill the last row; the pad length is recorded in a
/// tEXt chunk ("padding") so decoding is lossless.
struct GrayPng {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t padding = 0;
    std::vector<std::uint8_t> pixels;  // width*height bytes, padding included
};

std::vector<std::uint8_t> encode_gray_png(std::span<const std::uint8_t> payload);
GrayPng parse_gray_png(std::span<const std::uint8_t> png_bytes);

/// parse + strip the recorded padding; inverse of encode_gray_png.
std::vector<std::uint8_t> decode_gray_png(std::span<const std::uint8_t> png_bytes);

std::vector<std::uint8_t> read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace deltamask
