#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flexnn {

/// Extents of a 4-D volume. K is 1 for activations.
struct Dims4 {
    int x = 1;
    int y = 1;
    int c = 1;
    int k = 1;

    std::size_t volume() const {
        return static_cast<std::size_t>(x) * y * c * k;
    }
    bool operator==(const Dims4&) const = default;
};

std::string to_string(const Dims4& d);

/// Dense integer volume with C-innermost linearization:
/// index = ((k*Y + y)*X + x)*C + c.
template <typename T>
class BasicTensor4 {
public:
    using value_type = T;

    BasicTensor4() = default;

    explicit BasicTensor4(Dims4 dims) : dims_(dims) {
        if (dims.x < 1 || dims.y < 1 || dims.c < 1 || dims.k < 1)
            throw std::invalid_argument("tensor dims must be >= 1, got " + to_string(dims));
        data_.assign(dims.volume(), T{0});
    }

    BasicTensor4(Dims4 dims, std::vector<T> data) : BasicTensor4(dims) {
        if (data.size() != dims.volume())
            throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                        " does not match dims " + to_string(dims));
        data_ = std::move(data);
    }

    const Dims4& dims() const { return dims_; }
    std::size_t size() const { return data_.size(); }

    std::size_t index(int x, int y, int c, int k = 0) const {
        return ((static_cast<std::size_t>(k) * dims_.y + y) * dims_.x + x) * dims_.c + c;
    }

    T& at(int x, int y, int c, int k = 0) { return data_[index(x, y, c, k)]; }
    T at(int x, int y, int c, int k = 0) const { return data_[index(x, y, c, k)]; }

    /// Channel vector at (x, y, k); contiguous because C is innermost.
    std::span<const T> channels(int x, int y, int k = 0) const {
        return {data_.data() + index(x, y, 0, k), static_cast<std::size_t>(dims_.c)};
    }
    std::span<T> channels(int x, int y, int k = 0) {
        return {data_.data() + index(x, y, 0, k), static_cast<std::size_t>(dims_.c)};
    }

    std::span<const T> data() const { return data_; }
    std::span<T> data() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    bool operator==(const BasicTensor4&) const = default;

private:
    Dims4 dims_{};
    std::vector<T> data_;
};

using Tensor4 = BasicTensor4<std::int8_t>;
/// 32-bit accumulator volume (psums before requantization).
using AccTensor4 = BasicTensor4<std::int32_t>;

enum class OpType { Conv, Eltwise };

std::string to_string(OpType op);
OpType op_from_string(const std::string& s);

/// One network layer: shapes, stride/padding, op type and sparsity statistics.
struct LayerDesc {
    std::string id;
    OpType op = OpType::Conv;
    int ix = 1, iy = 1, ic = 1;
    int fx = 1, fy = 1, oc = 1;
    int stride = 1;
    int pad_x = 0, pad_y = 0;
    int groups = 1;
    double weight_sparsity = 0.0;
    double act_sparsity = 0.0;

    int ox() const;
    int oy() const;
    /// Per-group input/output channels.
    int ic_per_group() const { return ic / groups; }
    int oc_per_group() const { return oc / groups; }

    /// MACs of the six-loop nest including zero-padding taps
    /// (element count for eltwise).
    std::int64_t dense_macs() const;

    Dims4 if_dims() const { return {ix, iy, ic, 1}; }
    Dims4 fl_dims() const;
    Dims4 of_dims() const { return {ox(), oy(), oc, 1}; }

    /// Throws std::invalid_argument describing the first broken invariant.
    void check() const;

    /// The per-group layer for grouped convolutions (identity when groups == 1).
    LayerDesc group_slice() const;

    bool operator==(const LayerDesc&) const = default;
};

LayerDesc make_conv(std::string id, int ix, int iy, int ic, int fx, int fy, int oc, int stride = 1,
                    int pad = 0);
LayerDesc make_eltwise(std::string id, int ix, int iy, int c);

struct LayerSparsity {
    std::string id;
    double weight_sparsity = 0.0;
    double act_sparsity = 0.0;
};

struct SparsityStats {
    std::vector<LayerSparsity> layers;
    double network_weight_sparsity = 0.0;
    double network_act_sparsity = 0.0;
};

/// Affine requantization of a 32-bit psum to INT8:
/// clamp(round_half_away(acc * multiplier / 2^shift)), then optional ReLU.
struct Requant {
    std::int32_t multiplier = 1;
    int shift = 0;
    bool relu = false;

    std::int8_t apply(std::int32_t acc) const;
    bool operator==(const Requant&) const = default;
};

// --- reference semantics --------------------------------------------------

/// Six-loop reference convolution with zero padding, 32-bit accumulation.
/// Filters are (FX, FY, IC/groups, OC). Serial; the oracle for everything else.
AccTensor4 conv2d_ref(const Tensor4& ifmap, const Tensor4& filters, int stride, int padding,
                      int groups = 1);
AccTensor4 conv2d_ref(const Tensor4& ifmap, const Tensor4& filters, const LayerDesc& layer);

/// OpenMP-parallel convolution; bit-identical to conv2d_ref.
AccTensor4 conv2d(const Tensor4& ifmap, const Tensor4& filters, const LayerDesc& layer);

/// Elementwise INT8 saturating add.
Tensor4 eltwise_add_ref(const Tensor4& a, const Tensor4& b);

Tensor4 requantize(const AccTensor4& acc, const Requant& rq);
Tensor4 relu(const Tensor4& t);

/// Deterministic tensor with exactly round(sparsity*N) zeros; nonzeros uniform
/// over [-128, 127] \ {0}.
Tensor4 gen_sparse_tensor(Dims4 dims, double sparsity, std::uint64_t seed);

double measured_sparsity(std::span<const std::int8_t> data);
inline double measured_sparsity(const Tensor4& t) { return measured_sparsity(t.data()); }

}  // namespace flexnn
