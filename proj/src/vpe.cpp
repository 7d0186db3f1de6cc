#include <algorithm>
#include <bit>
#include <stdexcept>

#include "flexnn/sim.hpp"

namespace flexnn {

const char* mode_name(SparsityMode m) {
    switch (m) {
        case SparsityMode::Dense: return "dense";
        case SparsityMode::WeightSided: return "weight_sided";
        case SparsityMode::TwoSided: return "two_sided";
    }
    return "?";
}

SparsityMode mode_from_string(const std::string& s) {
    if (s == "dense") return SparsityMode::Dense;
    if (s == "weight" || s == "weight_sided") return SparsityMode::WeightSided;
    if (s == "two" || s == "two_sided") return SparsityMode::TwoSided;
    throw std::invalid_argument("unknown mode '" + s + "' (expected dense|weight|two)");
}

AccessCounts& AccessCounts::operator+=(const AccessCounts& o) {
    rf_reads += o.rf_reads;
    rf_writes += o.rf_writes;
    sram_reads += o.sram_reads;
    sram_writes += o.sram_writes;
    dram_reads += o.dram_reads;
    dram_writes += o.dram_writes;
    noc_bytes += o.noc_bytes;
    return *this;
}

AccessCounts operator+(AccessCounts a, const AccessCounts& b) { return a += b; }

int Bitmap::popcount() const { return std::popcount(bits); }

Bitmap make_bitmap(std::span<const std::int8_t> dense) {
    if (dense.size() > kSubbankLen) throw std::invalid_argument("bitmap block longer than 16");
    Bitmap b{0, static_cast<int>(dense.size())};
    for (std::size_t i = 0; i < dense.size(); ++i)
        if (dense[i] != 0) b.bits |= static_cast<std::uint16_t>(1u << i);
    return b;
}

Bitmap combine_bitmaps(const Bitmap& if_bmp, const Bitmap& fl_bmp) {
    if (if_bmp.len != fl_bmp.len)
        throw std::invalid_argument("bitmap lengths differ: " + std::to_string(if_bmp.len) + " vs " +
                                    std::to_string(fl_bmp.len));
    return {static_cast<std::uint16_t>(if_bmp.bits & fl_bmp.bits), if_bmp.len};
}

std::vector<std::pair<int, int>> cag_pairs(const Bitmap& csb, const Bitmap& if_bmp, const Bitmap& fl_bmp) {
    if (csb != combine_bitmaps(if_bmp, fl_bmp))
        throw std::invalid_argument("cag_pairs: csb is not the AND of the operand bitmaps");
    std::vector<std::pair<int, int>> out;
    out.reserve(static_cast<std::size_t>(csb.popcount()));
    for (std::uint32_t rest = csb.bits; rest; rest &= rest - 1) {
        const int p = std::countr_zero(rest);
        const std::uint32_t below = (1u << p) - 1;
        out.emplace_back(std::popcount(if_bmp.bits & below), std::popcount(fl_bmp.bits & below));
    }
    return out;
}

Subbank Subbank::compress(std::span<const std::int8_t> dense, int len) {
    Subbank s;
    s.bmp = make_bitmap(dense.first(std::min<std::size_t>(dense.size(), static_cast<std::size_t>(len))));
    s.bmp.len = len;
    int n = 0;
    for (std::size_t i = 0; i < dense.size() && static_cast<int>(i) < len; ++i)
        if (dense[i] != 0) s.cd[n++] = dense[i];
    return s;
}

Subbank Subbank::raw(std::span<const std::int8_t> dense, int len) {
    Subbank s;
    const int valid = std::min(static_cast<int>(dense.size()), len);
    s.bmp = {static_cast<std::uint16_t>((1u << valid) - 1), len};
    std::copy_n(dense.begin(), valid, s.cd.begin());
    return s;
}

namespace {

int lane_slice(int len, int lanes) { return (len + lanes - 1) / lanes; }

void accumulate_pair(const Subbank& a, const Subbank& b, std::int32_t& slot, int lanes, int lane_base,
                     std::vector<int>& lane_macs, int& macs) {
    if (a.bmp.len != b.bmp.len)
        throw SimError("template/blocking mismatch: subbank lengths " + std::to_string(a.bmp.len) + " vs " +
                       std::to_string(b.bmp.len));
    const Bitmap csb = combine_bitmaps(a.bmp, b.bmp);
    const int slice = lane_slice(csb.len, lanes);
    int pos = 0;
    std::uint32_t rest = csb.bits;
    for (auto [ri, rf] : cag_pairs(csb, a.bmp, b.bmp)) {
        pos = std::countr_zero(rest);
        rest &= rest - 1;
        slot += std::int32_t{a.cd[ri]} * std::int32_t{b.cd[rf]};
        ++lane_macs[lane_base + pos / slice];
        ++macs;
    }
}

}  // namespace

RoundResult vpe_round(VpeState& st, Template tmpl, int select, int of_slot, int lanes) {
    if (lanes < 1) throw std::invalid_argument("vpe_round: lanes must be >= 1");
    RoundResult r;
    r.lane_macs.assign(4 * lanes, 0);
    if (tmpl == Template::VxV) {
        if (of_slot < 0 || of_slot >= 16) throw SimError("OF slot out of range");
        for (int i = 0; i < 4; ++i) {
            if (st.if_sb[i].bmp.len == 0 && st.fl_sb[i].bmp.len == 0) continue;
            accumulate_pair(st.if_sb[i], st.fl_sb[i], st.of[of_slot], lanes, i * lanes, r.lane_macs, r.macs);
        }
        r.psum_updates = r.macs > 0 ? 1 : 0;
    } else {
        if (select < 0 || select >= 4) throw SimError("MxM IF subbank select out of range");
        for (int j = 0; j < 4; ++j) {
            if (st.fl_sb[j].bmp.len == 0) continue;
            if (of_slot + j >= 16) throw SimError("OF slot out of range");
            const int before = r.macs;
            accumulate_pair(st.if_sb[select], st.fl_sb[j], st.of[of_slot + j], lanes, j * lanes, r.lane_macs,
                            r.macs);
            if (r.macs > before) ++r.psum_updates;
        }
    }
    r.cycles = std::max(1, *std::max_element(r.lane_macs.begin(), r.lane_macs.end()));
    return r;
}

int round_cycles(std::span<const Bitmap> csbs, int lanes) {
    int worst = 0;
    for (const Bitmap& c : csbs) {
        if (c.len == 0) continue;
        const int slice = lane_slice(c.len, lanes);
        const std::uint32_t mask = (1u << slice) - 1;
        for (int start = 0; start < c.len; start += slice)
            worst = std::max(worst, std::popcount((std::uint32_t{c.bits} >> start) & mask));
    }
    return std::max(1, worst);
}

FlexTreeResult flextree_accumulate(std::span<const std::int32_t> lanes, int ic_p, int ppms) {
    if (ic_p < 1 || ic_p > kFlexTreeLanes)
        throw std::invalid_argument("flextree: ic_p " + std::to_string(ic_p) + " outside [1, 16]");
    if (lanes.size() > kFlexTreeLanes) throw std::invalid_argument("flextree: more than 16 lanes");
    FlexTreeResult r;
    r.tap_level = tap_level_for(ic_p);
    const int block = 1 << r.tap_level;
    r.taps_per_round = kFlexTreeTaps[r.tap_level];
    for (int base = 0; base < kFlexTreeLanes; base += block) {
        std::int32_t sum = 0;
        for (int i = base; i < base + block; ++i)
            if (i < static_cast<int>(lanes.size())) sum += lanes[i];
        r.outputs.push_back(sum);
    }
    const int per_round = std::min(r.taps_per_round, std::max(1, ppms));
    r.extract_rounds = static_cast<int>((r.outputs.size() + per_round - 1) / per_round);
    return r;
}

std::int64_t vector_bytes(std::span<const std::int8_t> v, bool compressed) {
    const auto n = static_cast<std::int64_t>(v.size());
    if (!compressed) return n;
    const auto nnz = static_cast<std::int64_t>(std::count_if(v.begin(), v.end(), [](std::int8_t x) { return x != 0; }));
    return std::min(n, nnz + (n + 7) / 8);
}

}  // namespace flexnn
