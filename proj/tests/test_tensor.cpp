#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "flexnn/rng.hpp"
#include "flexnn/tensor.hpp"

using namespace flexnn;

namespace {

// Independent oracle: materialize a zero-padded copy of the input first, then run
// the plain six-loop nest with no bounds checks.
AccTensor4 padded_conv_oracle(const Tensor4& in, const Tensor4& fl, int stride, int pad) {
    const Dims4 d = in.dims();
    const int px = d.x + 2 * pad, py = d.y + 2 * pad;
    std::vector<int> padded(static_cast<std::size_t>(px) * py * d.c, 0);
    for (int y = 0; y < d.y; ++y)
        for (int x = 0; x < d.x; ++x)
            for (int c = 0; c < d.c; ++c)
                padded[(static_cast<std::size_t>(y + pad) * px + (x + pad)) * d.c + c] = in.at(x, y, c);
    const Dims4 f = fl.dims();
    const int ox = (px - f.x) / stride + 1, oy = (py - f.y) / stride + 1;
    AccTensor4 out({ox, oy, f.k, 1});
    for (int k = 0; k < f.k; ++k)
        for (int y = 0; y < oy; ++y)
            for (int x = 0; x < ox; ++x) {
                int acc = 0;
                for (int j = 0; j < f.y; ++j)
                    for (int i = 0; i < f.x; ++i)
                        for (int c = 0; c < d.c; ++c)
                            acc += padded[(static_cast<std::size_t>(y * stride + j) * px + x * stride + i) * d.c + c] *
                                   fl.at(i, j, c, k);
                out.at(x, y, k) = acc;
            }
    return out;
}

}  // namespace

TEST(Tensor, LayoutIsChannelInnermost) {
    Tensor4 t({3, 2, 4, 2});
    EXPECT_EQ(t.index(0, 0, 1, 0), 1u);
    EXPECT_EQ(t.index(1, 0, 0, 0), 4u);
    EXPECT_EQ(t.index(0, 1, 0, 0), 12u);
    EXPECT_EQ(t.index(0, 0, 0, 1), 24u);
    EXPECT_EQ(t.size(), 48u);
}

TEST(Tensor, RejectsBadDims) {
    EXPECT_THROW(Tensor4({0, 1, 1, 1}), std::invalid_argument);
    EXPECT_THROW(Tensor4({2, 2, 2, 1}, std::vector<std::int8_t>(7)), std::invalid_argument);
}

TEST(Conv, ResNetBottleneckShape) {
    auto l = make_conv("res2a", 56, 56, 64, 1, 1, 256);
    l.check();
    EXPECT_EQ(l.of_dims(), (Dims4{56, 56, 256, 1}));
}

TEST(Conv, ZeroInputGivesZeroOutput) {
    Tensor4 in({5, 5, 3, 1});
    auto fl = gen_sparse_tensor({3, 3, 3, 4}, 0.2, 5);
    auto out = conv2d_ref(in, fl, 1, 1);
    for (auto v : out.data()) EXPECT_EQ(v, 0);
}

TEST(Conv, SmallPaddedLayerMatchesOracle) {
    auto in = gen_sparse_tensor({4, 4, 2, 1}, 0.0, 7);
    auto fl = gen_sparse_tensor({3, 3, 2, 2}, 0.0, 7 + 1);
    auto out = conv2d_ref(in, fl, 1, 1);
    auto want = padded_conv_oracle(in, fl, 1, 1);
    ASSERT_EQ(out.dims(), (Dims4{4, 4, 2, 1}));
    EXPECT_EQ(out, want);
}

TEST(Conv, RandomShapesMatchOracle) {
    Rng rng(1234);
    for (int trial = 0; trial < 60; ++trial) {
        const int fx = static_cast<int>(rng.range(1, 3)), fy = static_cast<int>(rng.range(1, 3));
        const int pad = static_cast<int>(rng.range(0, 1));
        const int stride = static_cast<int>(rng.range(1, 2));
        const int ix = static_cast<int>(rng.range(std::max(fx, fy), 7));
        const int ic = static_cast<int>(rng.range(1, 9)), oc = static_cast<int>(rng.range(1, 5));
        auto in = gen_sparse_tensor({ix, ix, ic, 1}, rng.unit(), rng.next());
        auto fl = gen_sparse_tensor({fx, fy, ic, oc}, rng.unit(), rng.next());
        EXPECT_EQ(conv2d_ref(in, fl, stride, pad), padded_conv_oracle(in, fl, stride, pad));
    }
}

TEST(Conv, ParallelMatchesSerial) {
    auto l = make_conv("p", 13, 11, 24, 3, 3, 20, 2, 1);
    auto in = gen_sparse_tensor(l.if_dims(), 0.4, 21);
    auto fl = gen_sparse_tensor(l.fl_dims(), 0.6, 22);
    EXPECT_EQ(conv2d(in, fl, l), conv2d_ref(in, fl, l));
}

TEST(Conv, GroupedEqualsPerGroupConvs) {
    auto l = make_conv("dw", 6, 6, 8, 3, 3, 8, 1, 1);
    l.groups = 4;
    auto in = gen_sparse_tensor(l.if_dims(), 0.3, 31);
    auto fl = gen_sparse_tensor(l.fl_dims(), 0.3, 32);
    auto out = conv2d_ref(in, fl, l);
    for (int g = 0; g < 4; ++g) {
        Tensor4 gi({6, 6, 2, 1});
        Tensor4 gf({3, 3, 2, 2});
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x)
                for (int c = 0; c < 2; ++c) gi.at(x, y, c) = in.at(x, y, 2 * g + c);
        for (int k = 0; k < 2; ++k)
            for (int y = 0; y < 3; ++y)
                for (int x = 0; x < 3; ++x)
                    for (int c = 0; c < 2; ++c) gf.at(x, y, c, k) = fl.at(x, y, c, 2 * g + k);
        auto part = padded_conv_oracle(gi, gf, 1, 1);
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x)
                for (int k = 0; k < 2; ++k) EXPECT_EQ(out.at(x, y, 2 * g + k), part.at(x, y, k));
    }
}

TEST(Conv, IdentityFilterExtractsChannel) {
    auto in = gen_sparse_tensor({5, 4, 6, 1}, 0.3, 41);
    for (int c = 0; c < 6; ++c) {
        Tensor4 fl({1, 1, 6, 1});
        fl.at(0, 0, c, 0) = 1;
        auto out = conv2d_ref(in, fl, 1, 0);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 5; ++x) EXPECT_EQ(out.at(x, y, 0), in.at(x, y, c));
    }
}

TEST(Conv, LinearInInput) {
    // values kept in [-60, 60] so a+b stays inside int8
    auto shrink = [](Tensor4 t) {
        for (auto& v : t.data()) v = static_cast<std::int8_t>(v / 2 - v / 8);
        return t;
    };
    auto a = shrink(gen_sparse_tensor({6, 6, 5, 1}, 0.2, 51));
    auto b = shrink(gen_sparse_tensor({6, 6, 5, 1}, 0.2, 52));
    auto f = gen_sparse_tensor({3, 3, 5, 3}, 0.1, 53);
    Tensor4 sum(a.dims());
    for (std::size_t i = 0; i < sum.size(); ++i)
        sum.data()[i] = static_cast<std::int8_t>(a.data()[i] + b.data()[i]);
    auto ra = conv2d_ref(a, f, 1, 1), rb = conv2d_ref(b, f, 1, 1), rs = conv2d_ref(sum, f, 1, 1);
    for (std::size_t i = 0; i < rs.size(); ++i) EXPECT_EQ(ra.data()[i] + rb.data()[i], rs.data()[i]);
}

TEST(Conv, DimensionMismatchThrows) {
    Tensor4 in({4, 4, 3, 1});
    Tensor4 fl({3, 3, 2, 1});
    EXPECT_THROW(conv2d_ref(in, fl, 1, 1), std::invalid_argument);
    Tensor4 big({7, 7, 3, 1});
    EXPECT_THROW(conv2d_ref(in, big, 1, 0), std::invalid_argument);
}

TEST(Layer, CheckRejectsBadShapes) {
    EXPECT_THROW(make_conv("a", 4, 4, 3, 5, 5, 1).check(), std::invalid_argument);
    auto l = make_conv("b", 4, 4, 3, 1, 1, 4);
    l.groups = 2;
    EXPECT_THROW(l.check(), std::invalid_argument);
    l = make_conv("c", 4, 4, 3, 1, 1, 4);
    l.weight_sparsity = 1.5;
    EXPECT_THROW(l.check(), std::invalid_argument);
    EXPECT_NO_THROW(make_eltwise("e", 7, 7, 32).check());
}

TEST(Eltwise, Saturates) {
    Tensor4 a({1, 1, 1, 1}, {100}), b({1, 1, 1, 1}, {100});
    EXPECT_EQ(eltwise_add_ref(a, b).at(0, 0, 0), 127);
    Tensor4 c({1, 1, 1, 1}, {-100});
    EXPECT_EQ(eltwise_add_ref(c, c).at(0, 0, 0), -128);
    Tensor4 z({2, 2, 2, 1});
    EXPECT_EQ(eltwise_add_ref(z, z), z);
}

TEST(Eltwise, RandomPairMatchesScalarLoop) {
    auto a = gen_sparse_tensor({3, 3, 7, 1}, 0.3, 3);
    auto b = gen_sparse_tensor({3, 3, 7, 1}, 0.3, 3 + 100);
    auto out = eltwise_add_ref(a, b);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int s = a.data()[i] + b.data()[i];
        s = s > 127 ? 127 : (s < -128 ? -128 : s);
        EXPECT_EQ(out.data()[i], s);
    }
    EXPECT_THROW(eltwise_add_ref(a, Tensor4({3, 3, 6, 1})), std::invalid_argument);
}

TEST(Generator, ExactZeroCount) {
    EXPECT_EQ(measured_sparsity(gen_sparse_tensor({4, 4, 4, 1}, 0.0, 1)), 0.0);
    EXPECT_EQ(measured_sparsity(gen_sparse_tensor({4, 4, 4, 1}, 1.0, 1)), 1.0);
    auto t = gen_sparse_tensor({2, 2, 8, 1}, 0.5, 1);
    EXPECT_EQ(std::count(t.data().begin(), t.data().end(), 0), 16);
    auto u = gen_sparse_tensor({5, 7, 3, 1}, 0.37, 99);
    EXPECT_EQ(std::count(u.data().begin(), u.data().end(), 0), std::llround(0.37 * 105));
}

TEST(Generator, DeterministicPerSeed) {
    EXPECT_EQ(gen_sparse_tensor({4, 4, 4, 2}, 0.5, 8), gen_sparse_tensor({4, 4, 4, 2}, 0.5, 8));
    EXPECT_NE(gen_sparse_tensor({4, 4, 4, 2}, 0.5, 8), gen_sparse_tensor({4, 4, 4, 2}, 0.5, 9));
    EXPECT_THROW(gen_sparse_tensor({1, 1, 1, 1}, -0.1, 0), std::invalid_argument);
}

TEST(Generator, NonzerosCoverFullRange) {
    auto t = gen_sparse_tensor({64, 64, 4, 1}, 0.0, 2);
    auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
    EXPECT_EQ(*lo, -128);
    EXPECT_EQ(*hi, 127);
}

TEST(Relu, ClampsNegatives) {
    Tensor4 t({3, 1, 1, 1}, {-5, 0, 7});
    EXPECT_EQ(relu(t), Tensor4({3, 1, 1, 1}, {0, 0, 7}));
    Tensor4 neg({2, 2, 1, 1}, {-1, -2, -3, -128});
    EXPECT_EQ(measured_sparsity(relu(neg)), 1.0);
    auto r = gen_sparse_tensor({8, 8, 8, 1}, 0.2, 9);
    EXPECT_GE(measured_sparsity(relu(r)), measured_sparsity(r));
}

TEST(Requant, RoundsHalfAwayFromZero) {
    Requant rq{1, 2, false};
    EXPECT_EQ(rq.apply(6), 2);    // 1.5 -> 2
    EXPECT_EQ(rq.apply(-6), -2);  // -1.5 -> -2
    EXPECT_EQ(rq.apply(5), 1);
    EXPECT_EQ(rq.apply(-5), -1);
    EXPECT_EQ(rq.apply(100000), 127);
    EXPECT_EQ(rq.apply(-100000), -128);
    EXPECT_EQ((Requant{3, 0, true}).apply(-4), 0);
    EXPECT_EQ((Requant{3, 0, true}).apply(4), 12);
}
