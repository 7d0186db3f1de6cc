#include <algorithm>
#include <bit>
#include <ostream>
#include <stdexcept>

#include "analytic.hpp"
#include "flexnn/sim.hpp"

namespace flexnn {

namespace {

using detail::ceil_div;

constexpr std::array<std::int8_t, 64> kZeros{};

/// Nonzero bits of every channel vector of a tensor, 64 channels per word.
struct NzMasks {
    int words = 0;
    std::vector<std::uint64_t> bits;

    const std::uint64_t* row(std::size_t r) const { return bits.data() + r * static_cast<std::size_t>(words); }
};

NzMasks nz_masks(const Tensor4& t) {
    const Dims4 d = t.dims();
    NzMasks m;
    m.words = (d.c + 63) / 64;
    const std::size_t rows = d.volume() / static_cast<std::size_t>(d.c);
    m.bits.assign(rows * static_cast<std::size_t>(m.words), 0);
    auto data = t.data();
    for (std::size_t r = 0; r < rows; ++r)
        for (int c = 0; c < d.c; ++c)
            if (data[r * d.c + c] != 0) m.bits[r * m.words + c / 64] |= std::uint64_t{1} << (c % 64);
    return m;
}

std::uint16_t ones(int n) { return n <= 0 ? 0 : static_cast<std::uint16_t>((1u << n) - 1); }

std::uint16_t bits_at(const std::uint64_t* m, int off, int n) {
    if (n <= 0) return 0;
    const int w = off >> 6, sh = off & 63;
    std::uint64_t v = m[w] >> sh;
    if (sh + n > 64) v |= m[w + 1] << (64 - sh);
    return static_cast<std::uint16_t>(v & ones(n));
}

struct Range {
    int start = 0;
    int n = 0;
};

Range tile_range(std::int64_t t, int parts, int p, int block, int extent) {
    const std::int64_t start = (t * parts + p) * block;
    return {static_cast<int>(std::min<std::int64_t>(start, extent)),
            static_cast<int>(std::clamp<std::int64_t>(extent - start, 0, block))};
}

unsigned relevant_mask(Operand op, const LayerDesc& layer) { return 0x3Fu & ~irrelevant_mask(op, layer); }

void lane_counts(std::span<const Bitmap> csbs, int lanes, std::vector<int>& out) {
    out.clear();
    for (const Bitmap& c : csbs) {
        const int slice = c.len == 0 ? 1 : (c.len + lanes - 1) / lanes;
        for (int l = 0; l < lanes; ++l) {
            const int start = l * slice;
            out.push_back(start >= c.len ? 0 : std::popcount((std::uint32_t{c.bits} >> start) & ones(slice)));
        }
    }
}

class LayerSim {
public:
    LayerSim(const LayerDesc& layer, const Schedule& s, const Tensor4& ifmap, const Tensor4& filters,
             const HwConfig& hw, const SimOptions& opt);
    SimResult run();

private:
    std::size_t pe_index(int pic, int poc, int pox, int poy) const {
        return ((static_cast<std::size_t>(pic) * p_.oc + poc) * p_.ox + pox) * p_.oy + poy;
    }
    std::size_t if_row(int x, int y) const { return static_cast<std::size_t>(y) * layer_.ix + x; }
    std::size_t fl_row(int fx, int fy, int oc) const {
        return (static_cast<std::size_t>(oc) * layer_.fy + fy) * layer_.fx + fx;
    }

    void step_conv(const std::array<std::int64_t, kNumDims>& cur, bool if_new, bool fl_new, bool visit_start,
                   bool burst);
    void step_eltwise(const std::array<std::int64_t, kNumDims>& cur);
    void pe_conv(int pic, int poc, int pox, int poy, int fx, int fy, std::int64_t& cycles, std::int64_t& dense);
    void drain(std::int64_t tile, std::int64_t slots, std::int64_t& bytes, std::int64_t& dense_bytes);
    void close_step(std::int64_t compute, std::int64_t dense_compute, std::int64_t bytes, std::int64_t dense_bytes,
                    bool burst);
    void trace_round(int pic, int poc, int pox, int poy, int point, int oc, int cycles, int macs,
                     std::span<const int> lanes);

    const LayerDesc& layer_;
    const Schedule& s_;
    const Tensor4& ifmap_;
    const Tensor4& filters_;
    const HwConfig& hw_;
    const SimOptions& opt_;
    const Factors& b_;
    const Factors& p_;
    Trips tr_;
    bool eltwise_ = false;
    bool grouped_ = false;
    bool if_cmp_ = false;
    bool fl_cmp_ = false;
    int icg_ = 1, ocg_ = 1;
    int chunk_ = 1;
    int lanes_ = 1;
    std::int64_t of_visits_ = 1;
    std::int64_t icp_eff_ = 1;
    std::int64_t drain_per_burst_ = 0;
    std::int64_t step_no_ = 0;

    NzMasks ifm_, flm_;
    std::vector<VpeState> pes_;
    std::vector<std::int64_t> visits_;
    AccTensor4 spill_;
    AccTensor4 ref_;  // final psums for ZVC output sizing when not functional
    std::vector<Range> rx_, ry_, rc_, ri_;
    std::vector<int> lane_buf_;
    std::int64_t of_final_bytes_ = 0;
    SimResult r_;
};

LayerSim::LayerSim(const LayerDesc& layer, const Schedule& s, const Tensor4& ifmap, const Tensor4& filters,
                   const HwConfig& hw, const SimOptions& opt)
    : layer_(layer), s_(s), ifmap_(ifmap), filters_(filters), hw_(hw), opt_(opt), b_(s.blocking),
      p_(s.partitioning) {
    eltwise_ = layer.op == OpType::Eltwise;
    grouped_ = !eltwise_ && layer.groups > 1;
    tr_ = trips(layer, s);
    if_cmp_ = opt.mode == SparsityMode::TwoSided;
    fl_cmp_ = opt.mode != SparsityMode::Dense;
    lanes_ = hw.lanes_per_subbank();
    drain_per_burst_ = detail::drain_cycles_per_burst(s, hw);
    visits_.assign(static_cast<std::size_t>(tr_[Dim::OX] * tr_[Dim::OY] * tr_[Dim::OC]), 0);
    rx_.resize(p_.ox), ry_.resize(p_.oy), rc_.resize(p_.oc), ri_.resize(p_.ic);
    r_.functional = opt.functional;
    r_.steps = tr_.steps();
    if (opt.functional) r_.psums = AccTensor4(layer.of_dims());
    if (eltwise_) return;

    icg_ = layer.ic_per_group();
    ocg_ = layer.oc_per_group();
    chunk_ = static_cast<int>(ceil_div(b_.ic, hw.subbanks));
    of_visits_ = fetches_per_tile(Operand::OF, layer, reuse_suffix(layer, s.order, tr_), tr_);
    icp_eff_ = std::min<std::int64_t>(p_.ic, ceil_div(icg_, b_.ic));
    if (of_visits_ > 1) spill_ = AccTensor4(layer.of_dims());
    if (opt.functional) {
        pes_.resize(static_cast<std::size_t>(p_.ic) * p_.oc * p_.ox * p_.oy);
    } else {
        ifm_ = nz_masks(ifmap);
        flm_ = nz_masks(filters);
        if (opt.mode == SparsityMode::TwoSided) ref_ = conv2d(ifmap, filters, layer);
    }
}

void LayerSim::trace_round(int pic, int poc, int pox, int poy, int point, int oc, int cycles, int macs,
                           std::span<const int> lanes) {
    std::ostream& os = *opt_.trace;
    os << step_no_ << ',' << pic << ',' << poc << ',' << pox << ',' << poy << ',' << point << ',' << oc << ','
       << cycles << ',' << macs << ',';
    for (std::size_t i = 0; i < lanes.size(); ++i) os << (i ? ";" : "") << lanes[i];
    os << '\n';
}

void LayerSim::close_step(std::int64_t compute, std::int64_t dense_compute, std::int64_t bytes,
                          std::int64_t dense_bytes, bool burst) {
    const std::int64_t bw = hw_.sram_bytes_per_cycle();
    std::int64_t transfer = ceil_div(bytes, bw);
    std::int64_t dense_transfer = ceil_div(dense_bytes, bw);
    if (burst) {
        const std::int64_t fill = hw_.rf_swap_cycles + hw_.flextree_fill_cycles;
        compute += fill;
        dense_compute += fill;
        transfer += drain_per_burst_;
        dense_transfer += drain_per_burst_;
        ++r_.drain_bursts;
    }
    r_.compute_cycles += compute;
    r_.transfer_cycles += transfer;
    r_.total_cycles += std::max(compute, transfer);
    r_.dense_cycles += std::max(dense_compute, dense_transfer);
}

void LayerSim::pe_conv(int pic, int poc, int pox, int poy, int fx, int fy, std::int64_t& cycles,
                       std::int64_t& dense) {
    const Range ri = ri_[pic], rc = rc_[poc], rx = rx_[pox], ry = ry_[poy];
    const int group = grouped_ ? rc.start / ocg_ : 0;
    const int cbase = group * icg_ + ri.start;
    const bool vxv = s_.tmpl == Template::VxV;
    const int dense_round = detail::dense_round_cycles(s_.tmpl, b_.ic, ri.n, hw_);
    VpeState* st = opt_.functional ? &pes_[pe_index(pic, poc, pox, poy)] : nullptr;
    std::array<Bitmap, 4> csb{};

    for (int py = 0; py < ry.n; ++py) {
        const int iy = (ry.start + py) * layer_.stride + fy - layer_.pad_y;
        for (int px = 0; px < rx.n; ++px) {
            const int ix = (rx.start + px) * layer_.stride + fx - layer_.pad_x;
            const bool inb = ix >= 0 && ix < layer_.ix && iy >= 0 && iy < layer_.iy;
            const int point = py * b_.ox + px;
            const int slot0 = point * b_.oc;
            std::span<const std::int8_t> iv =
                inb ? ifmap_.channels(ix, iy).subspan(static_cast<std::size_t>(cbase), static_cast<std::size_t>(ri.n))
                    : std::span<const std::int8_t>(kZeros.data(), static_cast<std::size_t>(ri.n));

            if (vxv) {
                for (int j = 0; j < rc.n; ++j) {
                    const int oc = rc.start + j;
                    auto fv = filters_.channels(fx, fy, oc).subspan(static_cast<std::size_t>(ri.start),
                                                                     static_cast<std::size_t>(ri.n));
                    int cyc = 0, macs = 0;
                    if (st) {
                        for (int i = 0; i < hw_.subbanks; ++i) {
                            const int off = std::min(i * chunk_, ri.n);
                            const int n = std::clamp(ri.n - i * chunk_, 0, chunk_);
                            auto a = iv.subspan(static_cast<std::size_t>(off), static_cast<std::size_t>(n));
                            auto w = fv.subspan(static_cast<std::size_t>(off), static_cast<std::size_t>(n));
                            st->if_sb[i] = if_cmp_ ? Subbank::compress(a, chunk_) : Subbank::raw(a, chunk_);
                            st->fl_sb[i] = fl_cmp_ ? Subbank::compress(w, chunk_) : Subbank::raw(w, chunk_);
                        }
                        const RoundResult rr = vpe_round(*st, Template::VxV, 0, slot0 + j, lanes_);
                        cyc = rr.cycles, macs = rr.macs;
                        if (opt_.trace) trace_round(pic, poc, pox, poy, point, oc, cyc, macs, rr.lane_macs);
                    } else {
                        const std::uint64_t* im = inb ? ifm_.row(if_row(ix, iy)) : nullptr;
                        const std::uint64_t* fm = flm_.row(fl_row(fx, fy, oc));
                        for (int i = 0; i < hw_.subbanks; ++i) {
                            const int n = std::clamp(ri.n - i * chunk_, 0, chunk_);
                            const std::uint16_t a =
                                !if_cmp_ ? ones(n) : (im ? bits_at(im, cbase + i * chunk_, n) : std::uint16_t{0});
                            const std::uint16_t w = fl_cmp_ ? bits_at(fm, ri.start + i * chunk_, n) : ones(n);
                            csb[i] = {static_cast<std::uint16_t>(a & w), chunk_};
                            macs += std::popcount(csb[i].bits);
                        }
                        cyc = round_cycles(csb, lanes_);
                        if (opt_.trace) {
                            lane_counts(csb, lanes_, lane_buf_);
                            trace_round(pic, poc, pox, poy, point, oc, cyc, macs, lane_buf_);
                        }
                    }
                    cycles += cyc;
                    dense += dense_round;
                    r_.macs_executed += macs;
                    const int upd = macs > 0 ? 1 : 0;
                    r_.psum_updates += upd;
                    r_.access.rf_reads += 2 * macs + 4 * upd;
                    r_.access.rf_writes += 4 * upd;
                }
            } else {
                int cyc = 0, macs = 0, upd = 0;
                if (st) {
                    st->if_sb[point] = if_cmp_ ? Subbank::compress(iv, b_.ic) : Subbank::raw(iv, b_.ic);
                    for (int j = 0; j < hw_.subbanks; ++j) {
                        if (j >= rc.n) {
                            st->fl_sb[j] = Subbank{};
                            continue;
                        }
                        auto fv = filters_.channels(fx, fy, rc.start + j)
                                      .subspan(static_cast<std::size_t>(ri.start), static_cast<std::size_t>(ri.n));
                        st->fl_sb[j] = fl_cmp_ ? Subbank::compress(fv, b_.ic) : Subbank::raw(fv, b_.ic);
                    }
                    const RoundResult rr = vpe_round(*st, Template::MxM, point, slot0, lanes_);
                    cyc = rr.cycles, macs = rr.macs, upd = rr.psum_updates;
                    if (opt_.trace) trace_round(pic, poc, pox, poy, point, rc.start, cyc, macs, rr.lane_macs);
                } else {
                    const std::uint64_t* im = inb ? ifm_.row(if_row(ix, iy)) : nullptr;
                    const std::uint16_t a = !if_cmp_ ? ones(ri.n) : (im ? bits_at(im, cbase, ri.n) : std::uint16_t{0});
                    for (int j = 0; j < rc.n; ++j) {
                        const std::uint64_t* fm = flm_.row(fl_row(fx, fy, rc.start + j));
                        const std::uint16_t w = fl_cmp_ ? bits_at(fm, ri.start, ri.n) : ones(ri.n);
                        csb[j] = {static_cast<std::uint16_t>(a & w), b_.ic};
                        const int m = std::popcount(csb[j].bits);
                        macs += m;
                        upd += m > 0 ? 1 : 0;
                    }
                    const std::span<const Bitmap> used(csb.data(), static_cast<std::size_t>(rc.n));
                    cyc = round_cycles(used, lanes_);
                    if (opt_.trace) {
                        lane_counts(used, lanes_, lane_buf_);
                        trace_round(pic, poc, pox, poy, point, rc.start, cyc, macs, lane_buf_);
                    }
                }
                cycles += cyc;
                dense += dense_round;
                r_.macs_executed += macs;
                r_.psum_updates += upd;
                r_.access.rf_reads += 2 * macs + 4 * upd;
                r_.access.rf_writes += 4 * upd;
            }
        }
    }
}

void LayerSim::step_conv(const std::array<std::int64_t, kNumDims>& cur, bool if_new, bool fl_new, bool visit_start,
                         bool burst) {
    const int fx = static_cast<int>(cur[idx(Dim::FX)]);
    const int fy = static_cast<int>(cur[idx(Dim::FY)]);
    for (int i = 0; i < p_.ox; ++i) rx_[i] = tile_range(cur[idx(Dim::OX)], p_.ox, i, b_.ox, layer_.ox());
    for (int i = 0; i < p_.oy; ++i) ry_[i] = tile_range(cur[idx(Dim::OY)], p_.oy, i, b_.oy, layer_.oy());
    for (int i = 0; i < p_.oc; ++i) rc_[i] = tile_range(cur[idx(Dim::OC)], p_.oc, i, b_.oc, layer_.oc);
    for (int i = 0; i < p_.ic; ++i) ri_[i] = tile_range(cur[idx(Dim::IC)], p_.ic, i, b_.ic, icg_);
    const auto count = [](const std::vector<Range>& v) {
        int valid = 0, total = 0;
        for (const Range& r : v) valid += r.n > 0, total += r.n;
        return std::pair{valid, total};
    };
    const auto [vx, tx] = count(rx_);
    const auto [vy, ty] = count(ry_);
    const auto [vc, tc] = count(rc_);
    const std::int64_t slots = std::int64_t{tx} * ty * tc;
    AccessCounts& a = r_.access;
    std::int64_t bytes = 0, dense_bytes = 0;

    if (if_new) {
        for (int pic = 0; pic < p_.ic; ++pic) {
            if (ri_[pic].n == 0) continue;
            for (int pox = 0; pox < p_.ox; ++pox)
                for (int poy = 0; poy < p_.oy; ++poy) {
                    if (rx_[pox].n == 0 || ry_[poy].n == 0) continue;
                    // Consecutive OC partitions of one group share a fetch.
                    for (int poc = 0; poc < p_.oc;) {
                        if (rc_[poc].n == 0) break;
                        const int group = grouped_ ? rc_[poc].start / ocg_ : 0;
                        int share = 0;
                        while (poc < p_.oc && rc_[poc].n > 0 && (grouped_ ? rc_[poc].start / ocg_ : 0) == group)
                            ++share, ++poc;
                        std::int64_t got = 0, dense = 0;
                        for (int py = 0; py < ry_[poy].n; ++py) {
                            const int iy = (ry_[poy].start + py) * layer_.stride + fy - layer_.pad_y;
                            if (iy < 0 || iy >= layer_.iy) continue;
                            for (int px = 0; px < rx_[pox].n; ++px) {
                                const int ix = (rx_[pox].start + px) * layer_.stride + fx - layer_.pad_x;
                                if (ix < 0 || ix >= layer_.ix) continue;
                                got += vector_bytes(ifmap_.channels(ix, iy).subspan(
                                                        static_cast<std::size_t>(group * icg_ + ri_[pic].start),
                                                        static_cast<std::size_t>(ri_[pic].n)),
                                                    if_cmp_);
                                dense += ri_[pic].n;
                            }
                        }
                        a.sram_reads += got;
                        a.rf_writes += got * share;
                        bytes += got;
                        dense_bytes += dense;
                    }
                }
        }
    }

    if (fl_new) {
        for (int pic = 0; pic < p_.ic; ++pic)
            for (int poc = 0; poc < p_.oc; ++poc) {
                const Range ri = ri_[pic], rc = rc_[poc];
                if (ri.n == 0 || rc.n == 0) continue;
                std::int64_t got = 0;
                for (int oc = rc.start; oc < rc.start + rc.n; ++oc)
                    got += vector_bytes(filters_.channels(fx, fy, oc).subspan(static_cast<std::size_t>(ri.start),
                                                                              static_cast<std::size_t>(ri.n)),
                                        fl_cmp_);
                a.sram_reads += got;
                a.rf_writes += got * vx * vy;
                bytes += got;
                dense_bytes += std::int64_t{ri.n} * rc.n;
            }
    }

    const std::int64_t tile =
        (cur[idx(Dim::OC)] * tr_[Dim::OY] + cur[idx(Dim::OY)]) * tr_[Dim::OX] + cur[idx(Dim::OX)];
    if (visit_start) {
        const std::int64_t visit = ++visits_[static_cast<std::size_t>(tile)];
        if (visit > 1) {
            a.sram_reads += 4 * slots;
            a.rf_writes += 4 * slots;
            bytes += 4 * slots;
            dense_bytes += 4 * slots;
        }
        if (opt_.functional) {
            for (VpeState& st : pes_) st.of.fill(0);
            if (visit > 1)
                for (int poc = 0; poc < p_.oc; ++poc)
                    for (int pox = 0; pox < p_.ox; ++pox)
                        for (int poy = 0; poy < p_.oy; ++poy) {
                            auto& of = pes_[pe_index(0, poc, pox, poy)].of;
                            for (int py = 0; py < ry_[poy].n; ++py)
                                for (int px = 0; px < rx_[pox].n; ++px)
                                    for (int j = 0; j < rc_[poc].n; ++j)
                                        of[(py * b_.ox + px) * b_.oc + j] =
                                            spill_.at(rx_[pox].start + px, ry_[poy].start + py, rc_[poc].start + j);
                        }
        }
    }

    std::int64_t compute = 0, dense_compute = 0;
    for (int pic = 0; pic < p_.ic; ++pic) {
        if (ri_[pic].n == 0) continue;
        for (int poc = 0; poc < p_.oc; ++poc) {
            if (rc_[poc].n == 0) continue;
            for (int pox = 0; pox < p_.ox; ++pox) {
                if (rx_[pox].n == 0) continue;
                for (int poy = 0; poy < p_.oy; ++poy) {
                    if (ry_[poy].n == 0) continue;
                    std::int64_t cyc = 0, dense = 0;
                    pe_conv(pic, poc, pox, poy, fx, fy, cyc, dense);
                    compute = std::max(compute, cyc);
                    dense_compute = std::max(dense_compute, dense);
                }
            }
        }
    }

    if (burst) drain(tile, slots, bytes, dense_bytes);
    close_step(compute, dense_compute, bytes, dense_bytes, burst);
}

void LayerSim::drain(std::int64_t tile, std::int64_t slots, std::int64_t& bytes, std::int64_t& dense_bytes) {
    AccessCounts& a = r_.access;
    a.rf_reads += 4 * icp_eff_ * slots;
    const bool final = visits_[static_cast<std::size_t>(tile)] == of_visits_;
    AccTensor4& dst = final ? r_.psums : spill_;
    std::array<std::int32_t, kFlexTreeLanes> lanes{};

    if (opt_.functional) {
        for (int poc = 0; poc < p_.oc; ++poc)
            for (int pox = 0; pox < p_.ox; ++pox)
                for (int poy = 0; poy < p_.oy; ++poy)
                    for (int py = 0; py < ry_[poy].n; ++py)
                        for (int px = 0; px < rx_[pox].n; ++px)
                            for (int j = 0; j < rc_[poc].n; ++j) {
                                const int slot = (py * b_.ox + px) * b_.oc + j;
                                for (int pic = 0; pic < p_.ic; ++pic)
                                    lanes[pic] = pes_[pe_index(pic, poc, pox, poy)].of[slot];
                                const FlexTreeResult ft = flextree_accumulate(
                                    std::span<const std::int32_t>(lanes.data(), static_cast<std::size_t>(p_.ic)),
                                    p_.ic, hw_.ppms_per_column);
                                dst.at(rx_[pox].start + px, ry_[poy].start + py, rc_[poc].start + j) =
                                    ft.outputs.front();
                            }
    }

    if (!final) {
        a.sram_writes += 4 * slots;
        bytes += 4 * slots;
        dense_bytes += 4 * slots;
        return;
    }
    std::int64_t out = slots;
    if (opt_.mode == SparsityMode::TwoSided) {
        const AccTensor4& src = opt_.functional ? r_.psums : ref_;
        std::array<std::int8_t, kSubbankLen> v{};
        out = 0;
        for (int poc = 0; poc < p_.oc; ++poc)
            for (int pox = 0; pox < p_.ox; ++pox)
                for (int poy = 0; poy < p_.oy; ++poy)
                    for (int py = 0; py < ry_[poy].n; ++py)
                        for (int px = 0; px < rx_[pox].n; ++px) {
                            const int n = rc_[poc].n;
                            for (int j = 0; j < n; ++j)
                                v[j] = opt_.requant.apply(
                                    src.at(rx_[pox].start + px, ry_[poy].start + py, rc_[poc].start + j));
                            out += vector_bytes(std::span<const std::int8_t>(v.data(), static_cast<std::size_t>(n)),
                                                true);
                        }
    }
    a.sram_writes += out;
    of_final_bytes_ += out;
    bytes += out;
    dense_bytes += slots;
}

void LayerSim::step_eltwise(const std::array<std::int64_t, kNumDims>& cur) {
    AccessCounts& a = r_.access;
    std::int64_t compute = 0, bytes = 0;
    for (int poc = 0; poc < p_.oc; ++poc) {
        const Range rc = tile_range(cur[idx(Dim::OC)], p_.oc, poc, b_.oc, layer_.oc);
        for (int pox = 0; pox < p_.ox; ++pox) {
            const Range rx = tile_range(cur[idx(Dim::OX)], p_.ox, pox, b_.ox, layer_.ox());
            for (int poy = 0; poy < p_.oy; ++poy) {
                const Range ry = tile_range(cur[idx(Dim::OY)], p_.oy, poy, b_.oy, layer_.oy());
                const std::int64_t n = std::int64_t{rx.n} * ry.n * rc.n;
                if (n == 0) continue;
                compute = std::max(compute, ceil_div(n, hw_.macs_per_pe));
                r_.macs_executed += n;
                r_.psum_updates += n;
                a.sram_reads += 2 * n;
                a.sram_writes += n;
                a.rf_writes += 6 * n;
                a.rf_reads += 6 * n;
                bytes += 3 * n;
                if (!opt_.functional) continue;
                for (int y = ry.start; y < ry.start + ry.n; ++y)
                    for (int x = rx.start; x < rx.start + rx.n; ++x)
                        for (int c = rc.start; c < rc.start + rc.n; ++c)
                            r_.psums.at(x, y, c) = std::int32_t{ifmap_.at(x, y, c)} + std::int32_t{filters_.at(x, y, c)};
            }
        }
    }
    close_step(compute, compute, bytes, bytes, true);
}

SimResult LayerSim::run() {
    const unsigned if_rel = relevant_mask(Operand::IF, layer_);
    const unsigned fl_rel = relevant_mask(Operand::FL, layer_);
    const unsigned of_rel = relevant_mask(Operand::OF, layer_);
    const auto changed = [](const std::array<std::int64_t, kNumDims>& x, const std::array<std::int64_t, kNumDims>& y,
                            unsigned mask) {
        for (Dim d : kAllDims)
            if ((mask & (1u << idx(d))) && x[idx(d)] != y[idx(d)]) return true;
        return false;
    };
    // Odometer over the loop nest, innermost loop last in s.order.
    const auto advance = [&](std::array<std::int64_t, kNumDims>& c) {
        for (int i = kNumDims - 1; i >= 0; --i) {
            const int d = idx(s_.order[i]);
            if (++c[d] < tr_.t[d]) return true;
            c[d] = 0;
        }
        return false;
    };

    if (opt_.trace) *opt_.trace << "step,pic,poc,pox,poy,point,oc,cycles,macs,lane_macs\n";
    std::array<std::int64_t, kNumDims> cur{}, prev{}, next{};
    bool first = true, more = true;
    while (more) {
        next = cur;
        more = advance(next);
        if (eltwise_) {
            step_eltwise(cur);
        } else {
            const bool burst = !more || changed(cur, next, of_rel);
            step_conv(cur, first || changed(cur, prev, if_rel), first || changed(cur, prev, fl_rel),
                      first || changed(cur, prev, of_rel), burst);
        }
        prev = cur;
        cur = next;
        first = false;
        ++step_no_;
    }

    r_.macs_skipped = layer_.dense_macs() - r_.macs_executed;
    const bool dram = detail::spills_to_dram(layer_, hw_);
    AccessCounts& a = r_.access;
    if (eltwise_) {
        const auto n = static_cast<std::int64_t>(ifmap_.size());
        if (dram) a.dram_reads += 2 * n, a.dram_writes += n;
        if (opt_.functional) r_.ofmap = eltwise_add_ref(ifmap_, filters_);
        return r_;
    }
    for (int oc = 0; oc < layer_.oc; ++oc)
        for (int fy = 0; fy < layer_.fy; ++fy)
            for (int fx = 0; fx < layer_.fx; ++fx) a.dram_reads += vector_bytes(filters_.channels(fx, fy, oc), fl_cmp_);
    if (dram) {
        for (int y = 0; y < layer_.iy; ++y)
            for (int x = 0; x < layer_.ix; ++x) a.dram_reads += vector_bytes(ifmap_.channels(x, y), if_cmp_);
        a.dram_writes += of_final_bytes_;
    }
    if (opt_.functional) r_.ofmap = requantize(r_.psums, opt_.requant);
    return std::move(r_);
}

}  // namespace

SimResult simulate_layer(const LayerDesc& layer, const Schedule& s, const Tensor4& ifmap, const Tensor4& filters,
                         const HwConfig& hw, const SimOptions& opt) {
    layer.check();
    hw.check();
    if (ifmap.dims() != layer.if_dims())
        throw std::invalid_argument("ifmap dims " + to_string(ifmap.dims()) + " != layer " +
                                    to_string(layer.if_dims()));
    if (filters.dims() != layer.fl_dims())
        throw std::invalid_argument(std::string(layer.op == OpType::Eltwise ? "second addend" : "filter") + " dims " +
                                    to_string(filters.dims()) + " != layer " + to_string(layer.fl_dims()));
    require_valid(layer, s, hw);
    return LayerSim(layer, s, ifmap, filters, hw, opt).run();
}

}  // namespace flexnn
