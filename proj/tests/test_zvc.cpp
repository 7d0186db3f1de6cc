#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>

#include "flexnn/rng.hpp"
#include "flexnn/tensor.hpp"
#include "flexnn/zvc.hpp"

using namespace flexnn;
using Bytes = std::vector<std::uint8_t>;

namespace {

Bytes random_buffer(Rng& rng, std::size_t len, double sparsity) {
    Bytes b(len);
    for (auto& v : b) v = rng.coin(sparsity) ? 0 : static_cast<std::uint8_t>(rng.range(1, 255));
    return b;
}

Bytes slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return Bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::string data_path(const std::string& name) { return std::string(FLEXNN_TEST_DATA) + "/" + name; }

}  // namespace

TEST(Zvc, EncodesSmallExample) {
    auto s = zvc::encode(Bytes{0, 5, 0, 3});
    ASSERT_EQ(s.blocks.size(), 1u);
    EXPECT_EQ(s.blocks[0].compressed, (Bytes{5, 3}));
    EXPECT_EQ(s.blocks[0].bitmap, (Bytes{0b1010}));
    EXPECT_EQ(s.blocks[0].logical_len, 4u);
    EXPECT_EQ(zvc::decode(s), (Bytes{0, 5, 0, 3}));
}

TEST(Zvc, AllZeroBlock) {
    auto s = zvc::encode(Bytes(16, 0));
    ASSERT_EQ(s.blocks.size(), 1u);
    EXPECT_TRUE(s.blocks[0].compressed.empty());
    EXPECT_EQ(s.blocks[0].bitmap, (Bytes{0, 0}));
    EXPECT_EQ(zvc::compressed_size(s), (zvc::Footprint{0, 2}));
}

TEST(Zvc, EmptyStream) {
    auto s = zvc::encode(Bytes{});
    EXPECT_TRUE(s.blocks.empty());
    EXPECT_TRUE(zvc::decode(s).empty());
    EXPECT_EQ(zvc::compressed_size(s).total(), 0u);
}

TEST(Zvc, FootprintDense) {
    EXPECT_EQ(zvc::compressed_size(zvc::encode(Bytes(16, 9))), (zvc::Footprint{16, 2}));
}

TEST(Zvc, FootprintHalfSparse) {
    auto t = gen_sparse_tensor({1600, 1, 1, 1}, 0.5, 4);
    EXPECT_EQ(zvc::compressed_size(zvc::encode(t.data())).data_bytes, 800u);
    EXPECT_EQ(zvc::compressed_size(zvc::encode(t.data())).bitmap_bytes, 200u);
}

TEST(Zvc, PopcountMatchesNonzeroCount) {
    Rng rng(11);
    auto buf = random_buffer(rng, 64, 0.5);
    auto s = zvc::encode(buf);
    std::size_t pop = 0;
    for (auto& b : s.blocks)
        for (auto m : b.bitmap) pop += std::popcount(m);
    EXPECT_EQ(pop, static_cast<std::size_t>(std::count_if(buf.begin(), buf.end(), [](auto v) { return v; })));
    EXPECT_EQ(s.blocks.size(), 4u);
}

TEST(Zvc, BlocksAreSixteenBytesWithShortTail) {
    auto s = zvc::encode(Bytes(37, 1), 5);
    ASSERT_EQ(s.blocks.size(), 3u);
    EXPECT_EQ(s.blocks[0].logical_len, 16u);
    EXPECT_EQ(s.blocks[2].logical_len, 5u);
    EXPECT_EQ(s.blocks[2].bitmap, (Bytes{0x1f}));
    EXPECT_EQ(s.logical_len(), 37u);
    EXPECT_EQ(s.context_id, 5u);
}

TEST(Zvc, RoundTripFuzz) {
    Rng rng(2024);
    for (int i = 0; i < 2000; ++i) {
        auto buf = random_buffer(rng, rng.below(300), rng.unit());
        auto s = zvc::encode(buf);
        ASSERT_EQ(zvc::decode(s), buf);
        for (auto& b : s.blocks) {
            std::size_t pop = 0;
            for (auto m : b.bitmap) pop += std::popcount(m);
            ASSERT_EQ(pop, b.compressed.size());
        }
        ASSERT_EQ(zvc::deserialize(zvc::serialize(s)), s);
    }
}

TEST(Zvc, PayloadPreservesNonzeroOrder) {
    Rng rng(77);
    auto buf = random_buffer(rng, 200, 0.6);
    Bytes nz;
    std::copy_if(buf.begin(), buf.end(), std::back_inserter(nz), [](auto v) { return v != 0; });
    Bytes payload;
    for (auto& b : zvc::encode(buf).blocks) payload.insert(payload.end(), b.compressed.begin(), b.compressed.end());
    EXPECT_EQ(payload, nz);
}

TEST(Zvc, MoreZerosNeverGrowsPayload) {
    Rng rng(5);
    auto buf = random_buffer(rng, 500, 0.1);
    auto prev = zvc::compressed_size(zvc::encode(buf)).data_bytes;
    for (std::size_t i = 0; i < buf.size(); i += 7) {
        buf[i] = 0;
        auto now = zvc::compressed_size(zvc::encode(buf)).data_bytes;
        EXPECT_LE(now, prev);
        prev = now;
    }
}

TEST(Zvc, MismatchedBlockIsCorrupt) {
    auto s = zvc::encode(Bytes{0, 5, 0, 3});
    s.blocks[0].compressed.pop_back();
    EXPECT_THROW(zvc::decode(s), zvc::CorruptStream);
    s = zvc::encode(Bytes{0, 5, 0, 3});
    s.blocks[0].bitmap[0] |= 0x80;  // past logical_len
    EXPECT_THROW(zvc::decode(s), zvc::CorruptStream);
    s = zvc::encode(Bytes(20, 1));
    s.blocks[0].logical_len = 15;
    s.blocks[0].bitmap = {0xff, 0x7f};
    s.blocks[0].compressed.pop_back();
    EXPECT_THROW(zvc::decode(s), zvc::CorruptStream);
}

TEST(Zvc, DeserializeRejectsBadBytes) {
    auto good = zvc::serialize(zvc::encode(Bytes{0, 5, 0, 3}, 9));
    auto bad = good;
    bad[0] = 'X';
    EXPECT_THROW(zvc::deserialize(bad), zvc::CorruptStream);
    bad = good;
    bad.pop_back();
    EXPECT_THROW(zvc::deserialize(bad), zvc::CorruptStream);
    bad = good;
    bad.push_back(1);
    EXPECT_THROW(zvc::deserialize(bad), zvc::CorruptStream);
    EXPECT_THROW(zvc::deserialize(Bytes(5, 0)), zvc::CorruptStream);
}

TEST(ZvcGolden, FilesAreBitExact) {
    const std::pair<const char*, std::uint32_t> cases[] = {
        {"zvc_small", 0}, {"zvc_zeros16", 1}, {"zvc_empty", 2}, {"zvc_tail", 0x01020304}};
    for (auto [name, ctx] : cases) {
        SCOPED_TRACE(name);
        const Bytes dense = slurp(data_path(std::string(name) + ".bin"));
        const Bytes golden = slurp(data_path(std::string(name) + ".zvc"));
        ASSERT_FALSE(golden.empty());
        EXPECT_EQ(zvc::serialize(zvc::encode(dense, ctx)), golden);
        auto s = zvc::read_file(data_path(std::string(name) + ".zvc"));
        EXPECT_EQ(s.context_id, ctx);
        EXPECT_EQ(zvc::decode(s), dense);
    }
}

TEST(ZvcGolden, SmallHeaderLayout) {
    const Bytes golden = slurp(data_path("zvc_small.zvc"));
    const Bytes want = {'Z', 'V', 'C', '1', 4, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0x0a, 5, 3};
    EXPECT_EQ(golden, want);
}
