#include <gtest/gtest.h>

#include <numeric>

#include "flexnn/rng.hpp"
#include "flexnn/sim.hpp"

using namespace flexnn;

namespace {

// Bitmap from a string written MSB-first, e.g. "1010" sets bits 3 and 1.
Bitmap bm(const std::string& s) {
    Bitmap b{0, static_cast<int>(s.size())};
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[s.size() - 1 - i] == '1') b.bits |= static_cast<std::uint16_t>(1u << i);
    return b;
}

std::vector<std::int8_t> random_vec(Rng& rng, int n, double sparsity) {
    std::vector<std::int8_t> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.coin(sparsity) ? 0 : static_cast<std::int8_t>(rng.range(1, 127) * (rng.coin(0.5) ? 1 : -1));
    return v;
}

std::int32_t dot(const std::vector<std::int8_t>& a, const std::vector<std::int8_t>& b) {
    std::int32_t s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::int32_t{a[i]} * b[i];
    return s;
}

}  // namespace

TEST(Bitmaps, CombineIsAnd) {
    const Bitmap c = combine_bitmaps(bm("1010"), bm("1100"));
    EXPECT_EQ(c, bm("1000"));
    EXPECT_EQ(c.popcount(), 1);
    EXPECT_EQ(combine_bitmaps(bm("0110"), bm("1111")), bm("0110"));
    EXPECT_THROW(combine_bitmaps(bm("101"), bm("1010")), std::invalid_argument);
}

TEST(Bitmaps, CombinePopcountCountsBothNonzero) {
    Rng rng(11);
    for (int seed = 0; seed < 10000; ++seed) {
        const auto a = random_vec(rng, 16, rng.unit());
        const auto b = random_vec(rng, 16, rng.unit());
        int both = 0;
        for (int i = 0; i < 16; ++i) both += a[i] != 0 && b[i] != 0;
        ASSERT_EQ(combine_bitmaps(make_bitmap(a), make_bitmap(b)).popcount(), both);
    }
}

TEST(Bitmaps, CagPairsAreRanks) {
    const Bitmap a = bm("1101"), b = bm("1011");
    const Bitmap c = combine_bitmaps(a, b);
    EXPECT_EQ(c, bm("1001"));
    EXPECT_EQ(cag_pairs(c, a, b), (std::vector<std::pair<int, int>>{{0, 0}, {2, 2}}));
    EXPECT_TRUE(cag_pairs(Bitmap{0, 4}, bm("0000"), bm("1111")).empty());
    std::vector<std::pair<int, int>> diag;
    for (int i = 0; i < 7; ++i) diag.emplace_back(i, i);
    EXPECT_EQ(cag_pairs(bm("1111111"), bm("1111111"), bm("1111111")), diag);
    EXPECT_THROW(cag_pairs(bm("0001"), a, b), std::invalid_argument);
}

TEST(Vpe, DenseVxVCyclesPerLane) {
    VpeState st;
    std::vector<std::int8_t> a(16), b(16);
    std::iota(a.begin(), a.end(), 1);
    std::iota(b.begin(), b.end(), -8);
    for (int i = 0; i < 4; ++i) {
        st.if_sb[i] = Subbank::raw(a, 16);
        st.fl_sb[i] = Subbank::raw(b, 16);
    }
    const RoundResult one = vpe_round(st, Template::VxV, 0, 3, 1);
    EXPECT_EQ(one.cycles, 16);
    EXPECT_EQ(one.macs, 64);
    EXPECT_EQ(st.of[3], 4 * dot(a, b));
    const RoundResult two = vpe_round(st, Template::VxV, 0, 5, 2);
    EXPECT_EQ(two.cycles, 8);
    EXPECT_EQ(st.of[5], 4 * dot(a, b));
}

TEST(Vpe, ZeroIfSubbankCostsOneCycle) {
    VpeState st;
    std::vector<std::int8_t> zero(16, 0), w(16, 3);
    for (int i = 0; i < 4; ++i) {
        st.if_sb[i] = Subbank::compress(zero, 16);
        st.fl_sb[i] = Subbank::compress(w, 16);
    }
    const RoundResult r = vpe_round(st, Template::VxV, 0, 0, 2);
    EXPECT_EQ(r.macs, 0);
    EXPECT_EQ(r.psum_updates, 0);
    EXPECT_EQ(r.cycles, 1);
    EXPECT_EQ(st.of[0], 0);
}

TEST(Vpe, SparseRoundsEqualDenseDot) {
    Rng rng(5);
    for (int iter = 0; iter < 2000; ++iter) {
        VpeState st;
        std::int32_t want = 0;
        int worst = 0;
        for (int i = 0; i < 4; ++i) {
            const auto a = random_vec(rng, 16, 0.5), b = random_vec(rng, 16, 0.5);
            st.if_sb[i] = Subbank::compress(a, 16);
            st.fl_sb[i] = Subbank::compress(b, 16);
            want += dot(a, b);
            for (int half = 0; half < 2; ++half) {
                int n = 0;
                for (int k = half * 8; k < half * 8 + 8; ++k) n += a[k] != 0 && b[k] != 0;
                worst = std::max(worst, n);
            }
        }
        const RoundResult r = vpe_round(st, Template::VxV, 0, 7, 2);
        ASSERT_EQ(st.of[7], want);
        EXPECT_EQ(r.cycles, std::max(1, worst));
    }
}

TEST(Vpe, MxMOneIfSubbankAgainstFourFilters) {
    Rng rng(6);
    VpeState st;
    std::vector<std::vector<std::int8_t>> fl;
    const auto act = random_vec(rng, 12, 0.3);
    st.if_sb[2] = Subbank::compress(act, 12);
    for (int j = 0; j < 4; ++j) {
        fl.push_back(random_vec(rng, 12, 0.3));
        st.fl_sb[j] = Subbank::compress(fl.back(), 12);
    }
    const RoundResult r = vpe_round(st, Template::MxM, 2, 8, 2);
    for (int j = 0; j < 4; ++j) EXPECT_EQ(st.of[8 + j], dot(act, fl[j]));
    EXPECT_EQ(r.lane_macs.size(), 8u);
    EXPECT_EQ(r.cycles, *std::max_element(r.lane_macs.begin(), r.lane_macs.end()));
    EXPECT_THROW(vpe_round(st, Template::MxM, 2, 13, 2), SimError);
}

TEST(Vpe, LengthMismatchIsError) {
    VpeState st;
    std::vector<std::int8_t> a(8, 1);
    st.if_sb[0] = Subbank::raw(a, 8);
    st.fl_sb[0] = Subbank::raw(a, 6);
    EXPECT_THROW(vpe_round(st, Template::VxV, 0, 0, 2), SimError);
}

TEST(Vpe, RoundCyclesMatchesVpeRound) {
    Rng rng(8);
    for (int iter = 0; iter < 1000; ++iter) {
        VpeState st;
        std::array<Bitmap, 4> csb;
        const int len = static_cast<int>(rng.range(1, 16));
        for (int i = 0; i < 4; ++i) {
            st.if_sb[i] = Subbank::compress(random_vec(rng, len, 0.4), len);
            st.fl_sb[i] = Subbank::compress(random_vec(rng, len, 0.4), len);
            csb[i] = combine_bitmaps(st.if_sb[i].bmp, st.fl_sb[i].bmp);
        }
        const int lanes = static_cast<int>(rng.range(1, 4));
        ASSERT_EQ(round_cycles(csb, lanes), vpe_round(st, Template::VxV, 0, 0, lanes).cycles);
    }
}

TEST(FlexTree, FullDepthSumsSixteenLanes) {
    std::array<std::int32_t, 16> lanes;
    std::iota(lanes.begin(), lanes.end(), 1);
    const FlexTreeResult r = flextree_accumulate(lanes, 16);
    EXPECT_EQ(r.outputs, std::vector<std::int32_t>{136});
    EXPECT_EQ(r.tap_level, 4);
    EXPECT_EQ(r.taps_per_round, 1);
    EXPECT_EQ(r.extract_rounds, 1);
}

TEST(FlexTree, PassThroughAtIcp1) {
    std::array<std::int32_t, 16> lanes;
    std::iota(lanes.begin(), lanes.end(), 1);
    const FlexTreeResult r = flextree_accumulate(lanes, 1);
    EXPECT_EQ(r.outputs, std::vector<std::int32_t>(lanes.begin(), lanes.end()));
    EXPECT_EQ(r.taps_per_round, 8);
    EXPECT_EQ(r.extract_rounds, 4);  // 16 outputs, 4 PPMs
}

TEST(FlexTree, NonPowerOfTwoPadsWithZeros) {
    std::vector<std::int32_t> lanes(12);
    std::iota(lanes.begin(), lanes.end(), 1);
    const FlexTreeResult r = flextree_accumulate(lanes, 12);
    EXPECT_EQ(r.outputs.front(), 78);
    EXPECT_EQ(r.tap_level, 4);
}

TEST(FlexTree, TapCountsPerLevel) {
    const std::array<std::int32_t, 16> lanes{};
    const std::array<std::pair<int, int>, 5> want = {{{1, 8}, {2, 8}, {4, 4}, {8, 2}, {16, 1}}};
    for (auto [icp, taps] : want) EXPECT_EQ(flextree_accumulate(lanes, icp).taps_per_round, taps) << icp;
    EXPECT_THROW(flextree_accumulate(lanes, 0), std::invalid_argument);
    EXPECT_THROW(flextree_accumulate(lanes, 17), std::invalid_argument);
}

TEST(FlexTree, GroupedSumEqualsSerialAccumulation) {
    Rng rng(9);
    for (int iter = 0; iter < 1000; ++iter) {
        const int icp = static_cast<int>(rng.range(1, 16));
        std::array<std::int32_t, 16> lanes{};
        for (int i = 0; i < 16; ++i) lanes[i] = static_cast<std::int32_t>(rng.range(-100000, 100000));
        const FlexTreeResult r = flextree_accumulate(lanes, icp);
        const int block = static_cast<int>(std::bit_ceil(static_cast<unsigned>(icp)));
        ASSERT_EQ(r.outputs.size(), static_cast<std::size_t>(16 / block));
        for (int g = 0; g < 16 / block; ++g) {
            std::int32_t serial = 0;
            for (int i = 0; i < block; ++i) serial += lanes[g * block + i];
            ASSERT_EQ(r.outputs[g], serial);
        }
    }
}

TEST(VectorBytes, MinOfDenseAndZvc) {
    std::vector<std::int8_t> v(32, 0);
    EXPECT_EQ(vector_bytes(v, false), 32);
    EXPECT_EQ(vector_bytes(v, true), 4);
    v.assign(32, 1);
    EXPECT_EQ(vector_bytes(v, true), 32);
    v.assign(10, 0);
    v[3] = 5;
    EXPECT_EQ(vector_bytes(v, true), 3);
}
