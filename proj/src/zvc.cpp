#include "flexnn/zvc.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace flexnn::zvc {

namespace {

constexpr std::uint8_t kMagic[4] = {'Z', 'V', 'C', '1'};
constexpr std::size_t kHeaderBytes = 4 + 8 + 4;

std::size_t bitmap_len(std::size_t logical) { return (logical + 7) / 8; }

std::size_t popcount(const std::vector<std::uint8_t>& bytes) {
    std::size_t n = 0;
    for (auto b : bytes) n += static_cast<std::size_t>(std::popcount(b));
    return n;
}

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t at, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t{in[at + i]} << (8 * i);
    return v;
}

}  // namespace

std::uint64_t Stream::logical_len() const {
    std::uint64_t n = 0;
    for (const auto& b : blocks) n += b.logical_len;
    return n;
}

Stream encode(std::span<const std::uint8_t> dense, std::uint32_t context_id) {
    Stream s;
    s.context_id = context_id;
    s.blocks.reserve((dense.size() + kBlockBytes - 1) / kBlockBytes);
    for (std::size_t base = 0; base < dense.size(); base += kBlockBytes) {
        const std::size_t n = std::min(kBlockBytes, dense.size() - base);
        Block b;
        b.logical_len = static_cast<std::uint32_t>(n);
        b.bitmap.assign(bitmap_len(n), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint8_t v = dense[base + i];
            if (v != 0) {
                b.bitmap[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
                b.compressed.push_back(v);
            }
        }
        s.blocks.push_back(std::move(b));
    }
    return s;
}

Stream encode(std::span<const std::int8_t> dense, std::uint32_t context_id) {
    return encode(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(dense.data()),
                                                dense.size()),
                  context_id);
}

void check(const Stream& stream) {
    for (std::size_t i = 0; i < stream.blocks.size(); ++i) {
        const Block& b = stream.blocks[i];
        const std::string where = "block " + std::to_string(i) + ": ";
        if (b.logical_len > kBlockBytes)
            throw CorruptStream(where + "logical length exceeds block size");
        if (b.logical_len < kBlockBytes && i + 1 != stream.blocks.size())
            throw CorruptStream(where + "short block before stream tail");
        if (b.bitmap.size() != bitmap_len(b.logical_len))
            throw CorruptStream(where + "bitmap length does not match logical length");
        if (b.logical_len % 8 != 0 && !b.bitmap.empty() &&
            (b.bitmap.back() >> (b.logical_len % 8)) != 0)
            throw CorruptStream(where + "bitmap has bits past logical length");
        if (popcount(b.bitmap) != b.compressed.size())
            throw CorruptStream(where + "bitmap popcount " + std::to_string(popcount(b.bitmap)) +
                                " != payload length " + std::to_string(b.compressed.size()));
        for (auto v : b.compressed)
            if (v == 0) throw CorruptStream(where + "zero byte in compressed payload");
    }
}

std::vector<std::uint8_t> decode(const Stream& stream) {
    check(stream);
    std::vector<std::uint8_t> out;
    out.reserve(stream.logical_len());
    for (const Block& b : stream.blocks) {
        std::size_t next = 0;
        for (std::size_t i = 0; i < b.logical_len; ++i)
            out.push_back(b.bit(i) ? b.compressed[next++] : 0);
    }
    return out;
}

Footprint compressed_size(const Stream& stream) {
    Footprint f;
    for (const Block& b : stream.blocks) f.data_bytes += b.compressed.size();
    f.bitmap_bytes = bitmap_len(stream.logical_len());
    return f;
}

std::vector<std::uint8_t> serialize(const Stream& stream) {
    check(stream);
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_le(out, stream.logical_len(), 8);
    put_le(out, stream.context_id, 4);
    // Every block but the last covers 16 bytes, so per-block bitmaps concatenate
    // into one contiguous stream bitmap.
    for (const Block& b : stream.blocks) out.insert(out.end(), b.bitmap.begin(), b.bitmap.end());
    for (const Block& b : stream.blocks)
        out.insert(out.end(), b.compressed.begin(), b.compressed.end());
    return out;
}

Stream deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderBytes || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
        throw CorruptStream("missing ZVC1 header");
    const std::uint64_t logical = get_le(bytes, 4, 8);
    Stream s;
    s.context_id = static_cast<std::uint32_t>(get_le(bytes, 12, 4));
    const std::size_t bmp_bytes = bitmap_len(logical);
    if (bytes.size() < kHeaderBytes + bmp_bytes) throw CorruptStream("truncated bitmap");
    auto bitmap = bytes.subspan(kHeaderBytes, bmp_bytes);
    auto payload = bytes.subspan(kHeaderBytes + bmp_bytes);

    std::size_t next = 0;
    for (std::uint64_t base = 0; base < logical; base += kBlockBytes) {
        const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(kBlockBytes, logical - base));
        Block b;
        b.logical_len = static_cast<std::uint32_t>(n);
        b.bitmap.assign(bitmap.begin() + static_cast<std::ptrdiff_t>(base / 8),
                        bitmap.begin() + static_cast<std::ptrdiff_t>(base / 8 + bitmap_len(n)));
        const std::size_t nnz = popcount(b.bitmap);
        if (next + nnz > payload.size()) throw CorruptStream("payload shorter than bitmap popcount");
        b.compressed.assign(payload.begin() + static_cast<std::ptrdiff_t>(next),
                            payload.begin() + static_cast<std::ptrdiff_t>(next + nnz));
        next += nnz;
        s.blocks.push_back(std::move(b));
    }
    if (next != payload.size()) throw CorruptStream("trailing bytes after payload");
    check(s);
    return s;
}

void write_file(const std::string& path, const Stream& stream) {
    auto bytes = serialize(stream);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Stream read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

}  // namespace flexnn::zvc
