#include "deltamask/png_image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "deltamask/deflate.hpp"
#include "deltamask/errors.hpp"

namespace deltamask {

namespace {

constexpr std::uint8_t kPngSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};
constexpr char kPaddingKeyword[] = "padding";

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  std::span<const std::uint8_t> data) {
    write_be32(out, static_cast<std::uint32_t>(data.size()));
    std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uLong crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(4 + data.size()));
    write_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

std::vector<std::uint8_t> encode_gray_png(std::span<const std::uint8_t> payload) {
    std::size_t n = payload.size();
    auto width = static_cast<std::uint32_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    if (width == 0) width = 1;
    auto height = static_cast<std::uint32_t>((n + width - 1) / width);
    if (height == 0) height = 1;
    std::uint32_t padding = width * height - static_cast<std::uint32_t>(n);

    std::vector<std::uint8_t> out;
    out.insert(out.end(), kPngSignature, kPngSignature + 8);

    std::vector<std::uint8_t> ihdr;
    write_be32(ihdr, width);
    write_be32(ihdr, height);
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // adaptive filtering
    ihdr.push_back(0);  // no interlace
    append_chunk(out, "IHDR", ihdr);

    std::string pad_text = std::string(kPaddingKeyword) + '\0' + std::to_string(padding);
    append_chunk(out, "tEXt",
                 {reinterpret_cast<const std::uint8_t*>(pad_text.data()), pad_text.size()});

    // scanlines, each with a leading filter byte of 0
    std::vector<std::uint8_t> raster;
    raster.reserve(std::size_t(height) * (width + 1));
    std::size_t pos = 0;
    for (std::uint32_t y = 0; y < height; ++y) {
        raster.push_back(0);
        for (std::uint32_t x = 0; x < width; ++x) {
            raster.push_back(pos < n ? payload[pos] : 0);
            ++pos;
        }
    }
    auto idat = deflate_bytes(raster);
    append_chunk(out, "IDAT", idat);
    append_chunk(out, "IEND", {});
    return out;
}

GrayPng parse_gray_png(std::span<const std::uint8_t> png_bytes) {
    if (png_bytes.size() < 8 || std::memcmp(png_bytes.data(), kPngSignature, 8) != 0)
        throw MalformedHeader("not a PNG file");

    GrayPng img;
    bool saw_ihdr = false;
    bool saw_padding = false;
    std::vector<std::uint8_t> idat;
    std::size_t off = 8;
    while (off + 12 <= png_bytes.size()) {
        std::uint32_t len = read_be32(png_bytes, off);
        if (off + 12 + len > png_bytes.size()) throw TruncatedPayload("PNG chunk truncated");
        const char* type = reinterpret_cast<const char*>(png_bytes.data() + off + 4);
        auto data = png_bytes.subspan(off + 8, len);
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw MalformedHeader("bad IHDR length");
            img.width = read_be32(data, 0);
            img.height = read_be32(data, 4);
            if (data[8] != 8 || data[9] != 0)
                throw MalformedHeader("only 8-bit grayscale PNG is supported");
            if (data[12] != 0) throw MalformedHeader("interlaced PNG is not supported");
            saw_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data.begin(), data.end());
        } else if (std::memcmp(type, "tEXt", 4) == 0) {
            auto nul = std::find(data.begin(), data.end(), std::uint8_t(0));
            if (nul != data.end()) {
                std::string keyword(data.begin(), nul);
                if (keyword == kPaddingKeyword) {
                    std::string value(nul + 1, data.end());
                    img.padding = static_cast<std::uint32_t>(std::stoul(value));
                    saw_padding = true;
                }
            }
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        off += 12 + len;
    }
    if (!saw_ihdr) throw MalformedHeader("PNG has no IHDR");
    if (!saw_padding) throw MalformedHeader("PNG lacks the padding text chunk");
    if (img.width == 0 || img.height == 0) throw MalformedHeader("empty PNG raster");

    std::size_t stride = std::size_t(img.width) + 1;
    auto raster = inflate_bytes(idat, stride * img.height);
    img.pixels.reserve(std::size_t(img.width) * img.height);
    for (std::uint32_t y = 0; y < img.height; ++y) {
        if (raster[y * stride] != 0)
            throw MalformedHeader("unsupported PNG scanline filter");
        img.pixels.insert(img.pixels.end(), raster.begin() + y * stride + 1,
                          raster.begin() + (y + 1) * stride);
    }
    if (img.padding > img.pixels.size()) throw MalformedHeader("padding exceeds raster size");
    return img;
}

std::vector<std::uint8_t> decode_gray_png(std::span<const std::uint8_t> png_bytes) {
    GrayPng img = parse_gray_png(png_bytes);
    if (img.padding > img.pixels.size()) throw MalformedHeader("padding exceeds raster size");
    img.pixels.resize(img.pixels.size() - img.padding);
    return std::move(img.pixels);
}

std::vector<std::uint8_t> read_binary_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_binary_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write to " + path + " failed");
}

}  // namespace deltamask
