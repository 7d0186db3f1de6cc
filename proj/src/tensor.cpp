#include "flexnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flexnn/rng.hpp"

namespace flexnn {

std::string to_string(const Dims4& d) {
    return "(" + std::to_string(d.x) + ", " + std::to_string(d.y) + ", " + std::to_string(d.c) +
           ", " + std::to_string(d.k) + ")";
}

std::string to_string(OpType op) { return op == OpType::Conv ? "conv" : "eltwise"; }

OpType op_from_string(const std::string& s) {
    if (s == "conv") return OpType::Conv;
    if (s == "eltwise") return OpType::Eltwise;
    throw std::invalid_argument("unknown op '" + s + "' (expected conv|eltwise)");
}

int LayerDesc::ox() const {
    if (op == OpType::Eltwise) return ix;
    return (ix + 2 * pad_x - fx) / stride + 1;
}

int LayerDesc::oy() const {
    if (op == OpType::Eltwise) return iy;
    return (iy + 2 * pad_y - fy) / stride + 1;
}

std::int64_t LayerDesc::dense_macs() const {
    if (op == OpType::Eltwise) return std::int64_t{ix} * iy * ic;
    return std::int64_t{ox()} * oy() * oc * ic_per_group() * fx * fy;
}

Dims4 LayerDesc::fl_dims() const {
    if (op == OpType::Eltwise) return {ix, iy, ic, 1};
    return {fx, fy, ic_per_group(), oc};
}

void LayerDesc::check() const {
    auto fail = [&](const std::string& what) {
        throw std::invalid_argument("layer '" + id + "': " + what);
    };
    if (ix < 1 || iy < 1 || ic < 1) fail("input dims must be >= 1");
    if (weight_sparsity < 0.0 || weight_sparsity > 1.0) fail("weight_sparsity outside [0,1]");
    if (act_sparsity < 0.0 || act_sparsity > 1.0) fail("act_sparsity outside [0,1]");
    if (op == OpType::Eltwise) {
        if (fx != 1 || fy != 1 || oc != ic || stride != 1 || pad_x != 0 || pad_y != 0 ||
            groups != 1)
            fail("eltwise layers take a single (IX, IY, IC) shape");
        return;
    }
    if (fx < 1 || fy < 1 || oc < 1) fail("filter dims must be >= 1");
    if (stride < 1) fail("stride must be positive");
    if (pad_x < 0 || pad_y < 0) fail("padding must be non-negative");
    if (groups < 1 || ic % groups != 0 || oc % groups != 0)
        fail("groups must divide both IC and OC");
    if (ix + 2 * pad_x < fx || iy + 2 * pad_y < fy) fail("filter larger than padded input");
    if (ox() < 1 || oy() < 1) fail("output dims must be positive");
}

LayerDesc LayerDesc::group_slice() const {
    LayerDesc g = *this;
    g.ic = ic_per_group();
    g.oc = oc_per_group();
    g.groups = 1;
    return g;
}

LayerDesc make_conv(std::string id, int ix, int iy, int ic, int fx, int fy, int oc, int stride,
                    int pad) {
    LayerDesc l;
    l.id = std::move(id);
    l.op = OpType::Conv;
    l.ix = ix;
    l.iy = iy;
    l.ic = ic;
    l.fx = fx;
    l.fy = fy;
    l.oc = oc;
    l.stride = stride;
    l.pad_x = pad;
    l.pad_y = pad;
    return l;
}

LayerDesc make_eltwise(std::string id, int ix, int iy, int c) {
    LayerDesc l;
    l.id = std::move(id);
    l.op = OpType::Eltwise;
    l.ix = ix;
    l.iy = iy;
    l.ic = c;
    l.oc = c;
    return l;
}

std::int8_t Requant::apply(std::int32_t acc) const {
    std::int64_t v = std::int64_t{acc} * multiplier;
    if (shift > 0) {
        const std::int64_t half = std::int64_t{1} << (shift - 1);
        // round half away from zero
        v = v >= 0 ? (v + half) >> shift : -((-v + half) >> shift);
    }
    v = std::clamp<std::int64_t>(v, -128, 127);
    if (relu && v < 0) v = 0;
    return static_cast<std::int8_t>(v);
}

namespace {

void check_conv_operands(const Tensor4& ifmap, const Tensor4& filters, int stride, int padding,
                         int groups) {
    const Dims4& in = ifmap.dims();
    const Dims4& fl = filters.dims();
    if (in.k != 1) throw std::invalid_argument("ifmap must have K == 1, got " + to_string(in));
    if (groups < 1 || in.c % groups != 0 || fl.k % groups != 0)
        throw std::invalid_argument("groups must divide IC and OC");
    if (fl.c * groups != in.c)
        throw std::invalid_argument("filter channels " + std::to_string(fl.c) + " x groups " +
                                    std::to_string(groups) + " != ifmap channels " +
                                    std::to_string(in.c));
    if (stride < 1 || padding < 0) throw std::invalid_argument("bad stride/padding");
    if (in.x + 2 * padding < fl.x || in.y + 2 * padding < fl.y)
        throw std::invalid_argument("filter larger than padded input");
}

LayerDesc layer_for(const Tensor4& ifmap, const Tensor4& filters, int stride, int padding,
                    int groups) {
    LayerDesc l = make_conv("", ifmap.dims().x, ifmap.dims().y, ifmap.dims().c, filters.dims().x,
                            filters.dims().y, filters.dims().k, stride, padding);
    l.groups = groups;
    return l;
}

void check_layer_operands(const Tensor4& ifmap, const Tensor4& filters, const LayerDesc& layer) {
    if (ifmap.dims() != layer.if_dims())
        throw std::invalid_argument("ifmap dims " + to_string(ifmap.dims()) + " != layer " +
                                    to_string(layer.if_dims()));
    if (filters.dims() != layer.fl_dims())
        throw std::invalid_argument("filter dims " + to_string(filters.dims()) + " != layer " +
                                    to_string(layer.fl_dims()));
}

// One output row (fixed oy, all ox, all oc). Shared by the serial and parallel paths
// so that both compute the exact same sums in the same order.
void conv_row(const Tensor4& ifmap, const Tensor4& filters, const LayerDesc& l, int oy,
              AccTensor4& out) {
    const int icg = l.ic_per_group();
    const int ocg = l.oc_per_group();
    for (int ox = 0; ox < l.ox(); ++ox) {
        for (int oc = 0; oc < l.oc; ++oc) {
            const int g = oc / ocg;
            std::int32_t acc = 0;
            for (int fy = 0; fy < l.fy; ++fy) {
                const int iy = oy * l.stride + fy - l.pad_y;
                if (iy < 0 || iy >= l.iy) continue;
                for (int fx = 0; fx < l.fx; ++fx) {
                    const int ix = ox * l.stride + fx - l.pad_x;
                    if (ix < 0 || ix >= l.ix) continue;
                    auto a = ifmap.channels(ix, iy);
                    auto w = filters.channels(fx, fy, oc);
                    for (int c = 0; c < icg; ++c)
                        acc += std::int32_t{a[g * icg + c]} * std::int32_t{w[c]};
                }
            }
            out.at(ox, oy, oc) = acc;
        }
    }
}

}  // namespace

AccTensor4 conv2d_ref(const Tensor4& ifmap, const Tensor4& filters, int stride, int padding,
                      int groups) {
    check_conv_operands(ifmap, filters, stride, padding, groups);
    return conv2d_ref(ifmap, filters, layer_for(ifmap, filters, stride, padding, groups));
}

AccTensor4 conv2d_ref(const Tensor4& ifmap, const Tensor4& filters, const LayerDesc& layer) {
    layer.check();
    check_layer_operands(ifmap, filters, layer);
    AccTensor4 out(layer.of_dims());
    for (int oy = 0; oy < layer.oy(); ++oy) conv_row(ifmap, filters, layer, oy, out);
    return out;
}

AccTensor4 conv2d(const Tensor4& ifmap, const Tensor4& filters, const LayerDesc& layer) {
    layer.check();
    check_layer_operands(ifmap, filters, layer);
    AccTensor4 out(layer.of_dims());
    const int rows = layer.oy();
#pragma omp parallel for schedule(static)
    for (int oy = 0; oy < rows; ++oy) conv_row(ifmap, filters, layer, oy, out);
    return out;
}

Tensor4 eltwise_add_ref(const Tensor4& a, const Tensor4& b) {
    if (a.dims() != b.dims())
        throw std::invalid_argument("eltwise operand dims differ: " + to_string(a.dims()) + " vs " +
                                    to_string(b.dims()));
    Tensor4 out(a.dims());
    auto pa = a.data();
    auto pb = b.data();
    auto po = out.data();
    for (std::size_t i = 0; i < po.size(); ++i) {
        const int s = int{pa[i]} + int{pb[i]};
        po[i] = static_cast<std::int8_t>(std::clamp(s, -128, 127));
    }
    return out;
}

Tensor4 requantize(const AccTensor4& acc, const Requant& rq) {
    Tensor4 out(acc.dims());
    auto src = acc.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = rq.apply(src[i]);
    return out;
}

Tensor4 relu(const Tensor4& t) {
    Tensor4 out(t.dims());
    auto src = t.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::max<std::int8_t>(src[i], 0);
    return out;
}

Tensor4 gen_sparse_tensor(Dims4 dims, double sparsity, std::uint64_t seed) {
    if (!(sparsity >= 0.0 && sparsity <= 1.0))
        throw std::invalid_argument("sparsity must lie in [0, 1]");
    Tensor4 t(dims);
    const std::size_t n = t.size();
    const auto zeros = static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(n)));
    Rng rng(seed);
    std::vector<std::uint32_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
    rng.shuffle(order);
    auto d = t.data();
    for (std::size_t i = zeros; i < n; ++i) {
        // 255 nonzero values: [-128, -1] U [1, 127]
        auto v = static_cast<int>(rng.below(255)) - 128;
        if (v >= 0) ++v;
        d[order[i]] = static_cast<std::int8_t>(v);
    }
    return t;
}

double measured_sparsity(std::span<const std::int8_t> data) {
    if (data.empty()) return 0.0;
    auto zeros = std::count(data.begin(), data.end(), std::int8_t{0});
    return static_cast<double>(zeros) / static_cast<double>(data.size());
}

}  // namespace flexnn
