#include "deltamask/deflate.hpp"

#include <zlib.h>

#include "deltamask/errors.hpp"

namespace deltamask {

std::vector<std::uint8_t> deflate_bytes(std::span<const std::uint8_t> data) {
    uLongf bound = compressBound(static_cast<uLong>(data.size()));
    std::vector<std::uint8_t> out(bound);
    int rc = compress2(out.data(), &bound, data.data(), static_cast<uLong>(data.size()),
                       Z_BEST_COMPRESSION);
    if (rc != Z_OK) throw Error("deflate failed with zlib code " + std::to_string(rc));
    out.resize(bound);
    return out;
}

std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> data,
                                        std::size_t expected_size) {
    std::vector<std::uint8_t> out(expected_size);
    uLongf dest_len = static_cast<uLongf>(expected_size);
    int rc = uncompress(out.data(), &dest_len, data.data(), static_cast<uLong>(data.size()));
    if (rc != Z_OK || dest_len != expected_size)
        throw DecompressFailure("inflate failed (zlib code " + std::to_string(rc) + ")");
    return out;
}

}  // namespace deltamask
