#include <algorithm>
#include <bit>

#include "flexnn/schedule.hpp"

namespace flexnn {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::vector<int> powers_of_two_upto(int n) {
    std::vector<int> v;
    for (int p = 1; p <= n; p *= 2) v.push_back(p);
    return v;
}

void sort_unique(std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

std::vector<int> ic_partition_grid(int ic, int rows) {
    std::vector<int> v;
    for (int p : powers_of_two_upto(rows))
        if (p <= ic) v.push_back(p);
    for (int d = 1; d <= std::min(ic, rows); ++d)
        if (ic % d == 0) v.push_back(d);
    sort_unique(v);
    return v;
}

std::vector<int> ic_block_grid(int ic, int icp, int cap) {
    const int base = static_cast<int>(ceil_div(ic, icp));
    std::vector<int> v;
    for (int t = 1;; t *= 2) {
        const int b = static_cast<int>(ceil_div(base, t));
        if (b <= cap) v.push_back(b);
        if (b == 1) break;
    }
    sort_unique(v);
    return v;
}

std::vector<int> block_grid(int extent, int p, int cap) {
    const int single = static_cast<int>(ceil_div(extent, p));
    std::vector<int> v;
    for (int b : powers_of_two_upto(cap))
        if (b < single) v.push_back(b);
    if (single <= cap) v.push_back(single);
    sort_unique(v);
    return v;
}

std::vector<int> partition_grid(int extent, int b, int max_p) {
    std::vector<int> v;
    for (int p : powers_of_two_upto(max_p))
        if (std::int64_t{p - 1} * b < extent) v.push_back(p);
    return v;
}

std::vector<FactorSet> factor_sets(const LayerDesc& layer, const HwConfig& hw) {
    layer.check();
    hw.check();
    const bool eltwise = layer.op == OpType::Eltwise;
    const int icg = eltwise ? 1 : layer.ic_per_group();
    std::vector<FactorSet> out;

    const std::vector<Template> templates =
        eltwise ? std::vector<Template>{Template::VxV} : std::vector<Template>{Template::VxV, Template::MxM};
    for (Template tmpl : templates) {
        const bool mxm = tmpl == Template::MxM;
        const int ic_cap = mxm ? hw.subbank_bytes() : hw.if_rf_bytes;
        const int oc_cap = mxm ? hw.subbanks : hw.of_slots();
        const int pt_cap = mxm ? hw.subbanks : hw.of_slots();
        const auto icps = eltwise ? std::vector<int>{1} : ic_partition_grid(icg, hw.rows);
        for (int icp : icps) {
            const auto icbs = eltwise ? std::vector<int>{1} : ic_block_grid(icg, icp, ic_cap);
            const int group_rows = static_cast<int>(std::bit_ceil(static_cast<unsigned>(icp)));
            const int groups = std::max(1, hw.rows / group_rows);
            for (int icb : icbs) {
                for (int ocp : partition_grid(layer.oc, 1, hw.pes())) {
                    for (int ocb : block_grid(layer.oc, ocp, oc_cap)) {
                        if (std::int64_t{ocp - 1} * ocb >= layer.oc) continue;
                        const auto oc_cols = ceil_div(ocp, groups);
                        if (oc_cols > hw.cols || std::int64_t{icp} * ocp > hw.pes()) continue;
                        for (int oxp : partition_grid(layer.ox(), 1, hw.cols)) {
                            if (oc_cols * oxp > hw.cols) continue;
                            for (int oxb : block_grid(layer.ox(), oxp, pt_cap)) {
                                if (std::int64_t{oxp - 1} * oxb >= layer.ox() || oxb * ocb > hw.of_slots()) continue;
                                for (int oyp : partition_grid(layer.oy(), 1, hw.cols)) {
                                    if (oc_cols * oxp * oyp > hw.cols) continue;
                                    for (int oyb : block_grid(layer.oy(), oyp, pt_cap)) {
                                        if (std::int64_t{oyp - 1} * oyb >= layer.oy()) continue;
                                        if (oxb * oyb * ocb > hw.of_slots()) continue;
                                        Schedule s;
                                        s.tmpl = tmpl;
                                        s.blocking = {icb, ocb, oxb, oyb};
                                        s.partitioning = {icp, ocp, oxp, oyp};
                                        if (is_valid(layer, s, hw))
                                            out.push_back({tmpl, s.blocking, s.partitioning});
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

std::vector<LoopOrder> distinct_orders(const Trips& tr) {
    std::vector<LoopOrder> out;
    for (int r = 0; r < 720; ++r) {
        LoopOrder o = order_from_rank(r);
        if (canonical_order(o, tr) == o) out.push_back(o);
    }
    return out;
}

Enumeration enumerate(const LayerDesc& layer, const HwConfig& hw, std::size_t limit) {
    if (limit == 0) throw std::invalid_argument("enumerate: limit must be > 0");
    Enumeration e;
    for (const FactorSet& fs : factor_sets(layer, hw)) {
        Schedule s;
        s.tmpl = fs.tmpl;
        s.blocking = fs.blocking;
        s.partitioning = fs.partitioning;
        for (const LoopOrder& o : distinct_orders(trips(layer, s))) {
            if (e.schedules.size() == limit) {
                e.truncated = true;
                return e;
            }
            s.order = o;
            e.schedules.push_back(s);
        }
    }
    if (e.schedules.empty())
        e.reason = "layer '" + layer.id + "' has no schedule that fits the RF and array constraints";
    return e;
}

// --- descriptor -------------------------------------------------------------

int tap_level_for(int icp) {
    if (icp < 1 || icp > 16) throw std::invalid_argument("IC_P must lie in [1, 16]");
    return std::bit_width(static_cast<unsigned>(icp - 1));
}

namespace {

void check_descriptor(const ConfigDescriptor& d) {
    auto fail = [](const std::string& what) { throw DescriptorError("malformed descriptor: " + what); };
    if (d.order_code >= 720) fail("order code " + std::to_string(d.order_code) + " >= 720");
    const Factors& b = d.blocking;
    const Factors& p = d.partitioning;
    if (b.ic < 1 || b.oc < 1 || b.ox < 1 || b.oy < 1) fail("zero blocking counter");
    if (p.ic < 1 || p.oc < 1 || p.ox < 1 || p.oy < 1) fail("zero partition counter");
    if (p.ic > 16) fail("IC_P beyond FlexTree width");
    if (d.tap_level != tap_level_for(p.ic)) fail("tap level does not match IC_P");
    if ((d.routing == Routing::Internal) != (p.ic == 1)) fail("routing does not match IC_P");
    if (d.eltwise && (p.ic != 1 || b.ic != 1)) fail("eltwise descriptor with IC partitioning");
}

}  // namespace

std::array<std::uint32_t, 4> ConfigDescriptor::pack() const {
    check_descriptor(*this);
    auto u8 = [](int v, int shift) {
        if (v > 255) throw DescriptorError("counter " + std::to_string(v) + " exceeds 8 bits");
        return static_cast<std::uint32_t>(v) << shift;
    };
    std::array<std::uint32_t, 4> r{};
    r[0] = std::uint32_t{order_code} | (tmpl == Template::MxM ? 1u << 10 : 0u) | (eltwise ? 1u << 11 : 0u) |
           (routing == Routing::FlexTree ? 1u << 12 : 0u) | (static_cast<std::uint32_t>(tap_level) << 13) |
           (psum_spill ? 1u << 16 : 0u);
    r[1] = u8(blocking.ic, 0) | u8(blocking.oc, 8) | u8(blocking.ox, 16) | u8(blocking.oy, 24);
    r[2] = u8(partitioning.ic, 0) | u8(partitioning.ox, 8) | u8(partitioning.oy, 16);
    if (partitioning.oc > 0xffff) throw DescriptorError("OC_P exceeds 16 bits");
    r[3] = static_cast<std::uint32_t>(partitioning.oc);
    return r;
}

ConfigDescriptor ConfigDescriptor::unpack(const std::array<std::uint32_t, 4>& r) {
    if (r[0] >> 17) throw DescriptorError("malformed descriptor: reserved bits set in register 0");
    if (r[2] >> 24) throw DescriptorError("malformed descriptor: reserved bits set in register 2");
    if (r[3] >> 16) throw DescriptorError("malformed descriptor: reserved bits set in register 3");
    ConfigDescriptor d;
    d.order_code = static_cast<std::uint16_t>(r[0] & 0x3ff);
    d.tmpl = (r[0] >> 10) & 1 ? Template::MxM : Template::VxV;
    d.eltwise = (r[0] >> 11) & 1;
    d.routing = (r[0] >> 12) & 1 ? Routing::FlexTree : Routing::Internal;
    d.tap_level = static_cast<int>((r[0] >> 13) & 7);
    d.psum_spill = (r[0] >> 16) & 1;
    auto byte = [](std::uint32_t w, int i) { return static_cast<int>((w >> (8 * i)) & 0xff); };
    d.blocking = {byte(r[1], 0), byte(r[1], 1), byte(r[1], 2), byte(r[1], 3)};
    d.partitioning = {byte(r[2], 0), static_cast<int>(r[3]), byte(r[2], 1), byte(r[2], 2)};
    check_descriptor(d);
    return d;
}

ConfigDescriptor to_descriptor(const Schedule& s, const LayerDesc& layer, const HwConfig& hw) {
    require_valid(layer, s, hw);
    ConfigDescriptor d;
    d.order_code = static_cast<std::uint16_t>(order_rank(s.order));
    d.blocking = s.blocking;
    d.partitioning = s.partitioning;
    d.tmpl = s.tmpl;
    d.eltwise = layer.op == OpType::Eltwise;
    d.tap_level = tap_level_for(s.partitioning.ic);
    d.routing = s.partitioning.ic == 1 ? Routing::Internal : Routing::FlexTree;
    const Trips tr = trips(layer, s);
    d.psum_spill = fetches_per_tile(Operand::OF, layer, reuse_suffix(layer, s.order, tr), tr) > 1;
    return d;
}

Schedule from_descriptor(const ConfigDescriptor& d) {
    check_descriptor(d);
    Schedule s;
    s.order = order_from_rank(d.order_code);
    s.blocking = d.blocking;
    s.partitioning = d.partitioning;
    s.tmpl = d.tmpl;
    return s;
}

}  // namespace flexnn
