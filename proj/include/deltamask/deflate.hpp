#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace deltamask {

/// DEFLATE (zlib format) round trip. inflate_bytes needs the exact
/// uncompressed size, which our containers always carry; anything that
/// does not decompress to exactly that size throws DecompressFailure.
std::vector<std::uint8_t> deflate_bytes(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> data,
                                        std::size_t expected_size);

}  // namespace deltamask
