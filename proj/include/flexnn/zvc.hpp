#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flexnn::zvc {

/// Logical bytes covered by one block; the drain-side encoder works at this granularity.
inline constexpr std::size_t kBlockBytes = 16;

class CorruptStream : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Nonzero payload plus a 1-bit-per-byte presence bitmap (LSB-first within each
/// bitmap byte). popcount(bitmap) == compressed.size().
struct Block {
    std::vector<std::uint8_t> compressed;
    std::vector<std::uint8_t> bitmap;
    std::uint32_t logical_len = 0;

    bool bit(std::size_t i) const { return (bitmap[i / 8] >> (i % 8)) & 1u; }
    bool operator==(const Block&) const = default;
};

struct Stream {
    std::vector<Block> blocks;
    std::uint32_t context_id = 0;

    std::uint64_t logical_len() const;
    bool operator==(const Stream&) const = default;
};

struct Footprint {
    std::uint64_t data_bytes = 0;
    std::uint64_t bitmap_bytes = 0;
    std::uint64_t total() const { return data_bytes + bitmap_bytes; }
    bool operator==(const Footprint&) const = default;
};

Stream encode(std::span<const std::uint8_t> dense, std::uint32_t context_id = 0);
Stream encode(std::span<const std::int8_t> dense, std::uint32_t context_id = 0);

/// Throws CorruptStream when a block's bitmap does not agree with its payload.
std::vector<std::uint8_t> decode(const Stream& stream);

Footprint compressed_size(const Stream& stream);

/// Throws CorruptStream on the first broken block invariant.
void check(const Stream& stream);

// On-disk format, little-endian:
//   "ZVC1" | logical_len:u64 | context_id:u32 | bitmap bytes | compressed bytes
std::vector<std::uint8_t> serialize(const Stream& stream);
Stream deserialize(std::span<const std::uint8_t> bytes);

void write_file(const std::string& path, const Stream& stream);
Stream read_file(const std::string& path);

}  // namespace flexnn::zvc
