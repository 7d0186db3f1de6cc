#include "analytic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace flexnn::detail {

DimTiling tile_dim(int extent, int p, int b) {
    DimTiling d;
    d.trips = ceil_div(extent, std::int64_t{p} * b);
    d.tiles = ceil_div(extent, b);
    d.first = std::min<std::int64_t>(p, d.tiles);
    d.ext0.resize(static_cast<std::size_t>(d.trips));
    for (std::int64_t t = 0; t < d.trips; ++t)
        d.ext0[t] = static_cast<int>(std::clamp<std::int64_t>(extent - t * p * b, 0, b));
    return d;
}

std::int64_t inbound_pairs(int out, int filt, int in, int stride, int pad) {
    std::int64_t n = 0;
    for (int o = 0; o < out; ++o)
        for (int f = 0; f < filt; ++f) {
            const int i = o * stride + f - pad;
            if (i >= 0 && i < in) ++n;
        }
    return n;
}

int dense_round_cycles(Template t, int icb, int icn, const HwConfig& hw) {
    const int lanes = hw.lanes_per_subbank();
    const int len = t == Template::VxV ? static_cast<int>(ceil_div(icb, hw.subbanks)) : icb;
    return std::max(1, std::min(static_cast<int>(ceil_div(len, lanes)), icn));
}

namespace {

/// P(Binomial(n, d) <= m) for m in [0, n].
std::vector<double> binomial_cdf(int n, double d) {
    std::vector<double> pmf(static_cast<std::size_t>(n) + 1, 0.0);
    pmf[0] = 1.0;
    for (int i = 0; i < n; ++i)
        for (int k = i + 1; k >= 0; --k) pmf[k] = pmf[k] * (1 - d) + (k > 0 ? pmf[k - 1] * d : 0.0);
    for (int k = 1; k <= n; ++k) pmf[k] += pmf[k - 1];
    return pmf;
}

}  // namespace

RoundStats round_stats(Template t, int icb, int icn, int ocs, const HwConfig& hw, double density) {
    const int lanes = hw.lanes_per_subbank();
    std::vector<int> slices;
    const auto split = [&](int len, int valid) {
        const int slice = static_cast<int>(ceil_div(len, lanes));
        for (int l = 0; l < lanes; ++l) slices.push_back(std::clamp(valid - l * slice, 0, slice));
    };
    if (t == Template::VxV) {
        const int chunk = static_cast<int>(ceil_div(icb, hw.subbanks));
        for (int k = 0; k < hw.subbanks; ++k) split(chunk, std::clamp(icn - k * chunk, 0, chunk));
    } else {
        for (int j = 0; j < ocs; ++j) split(icb, std::min(icn, icb));
    }
    const int longest = slices.empty() ? 0 : *std::max_element(slices.begin(), slices.end());
    std::vector<std::vector<double>> cdf(static_cast<std::size_t>(longest) + 1);
    for (int n : slices)
        if (cdf[n].empty()) cdf[n] = binomial_cdf(n, density);
    // Cycles C = max(1, busiest lane); moments from the tail P(C > m).
    RoundStats r;
    double second = 1.0;
    for (int m = 1; m < longest; ++m) {
        double all_le = 1.0;
        for (int n : slices) all_le *= m >= n ? 1.0 : cdf[n][m];
        r.mean += 1.0 - all_le;
        second += (2.0 * m + 1.0) * (1.0 - all_le);
    }
    r.var = std::max(0.0, second - r.mean * r.mean);
    return r;
}

double expected_max_normal(int n) {
    if (n <= 1) return 0.0;
    thread_local std::map<int, double> cache;
    if (auto it = cache.find(n); it != cache.end()) return it->second;
    constexpr double h = 1e-3;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0), inv_sqrt2pi = 1.0 / std::sqrt(2.0 * M_PI);
    double e = 0.0;
    for (double x = -8.0; x <= 8.0; x += h) {
        const double cdf = 0.5 * std::erfc(-x * inv_sqrt2);
        e += x * n * inv_sqrt2pi * std::exp(-0.5 * x * x) * std::pow(cdf, n - 1) * h;
    }
    cache.emplace(n, e);
    return e;
}

std::int64_t drain_cycles_per_burst(const Schedule& s, const HwConfig& hw) {
    const ArrayMapping m = array_mapping(s, hw);
    const std::int64_t groups = std::min<std::int64_t>(m.groups_per_column, s.partitioning.oc);
    const std::int64_t outputs = std::int64_t{s.points()} * s.blocking.oc * groups;
    const int taps = kFlexTreeTaps[static_cast<std::size_t>(tap_level_for(s.partitioning.ic))];
    return ceil_div(outputs, std::min(taps, hw.ppms_per_column));
}

bool spills_to_dram(const LayerDesc& layer, const HwConfig& hw) {
    const auto in = static_cast<std::int64_t>(layer.if_dims().volume());
    const auto fl = static_cast<std::int64_t>(layer.fl_dims().volume());
    const auto out = static_cast<std::int64_t>(layer.of_dims().volume());
    return in + fl + out > hw.sram_bytes;
}

Terms layer_terms(const LayerDesc& layer, const Schedule& s, const HwConfig& hw, double density) {
    Terms t;
    t.eltwise = layer.op == OpType::Eltwise;
    t.grouped = !t.eltwise && layer.groups > 1;
    t.tr = trips(layer, s);
    const Factors& b = s.blocking;
    const Factors& p = s.partitioning;
    const int icg = t.eltwise ? 1 : layer.ic_per_group();

    const DimTiling tx = tile_dim(layer.ox(), p.ox, b.ox);
    const DimTiling ty = tile_dim(layer.oy(), p.oy, b.oy);
    const DimTiling tc = tile_dim(layer.oc, p.oc, b.oc);
    const DimTiling ti = tile_dim(icg, p.ic, b.ic);
    t.ox_tiles = tx.tiles, t.ox_first = tx.first;
    t.oy_tiles = ty.tiles, t.oy_first = ty.first;
    t.oc_tiles = tc.tiles, t.oc_first = tc.first;
    t.of_points = std::int64_t{layer.ox()} * layer.oy() * layer.oc;
    t.drain_per_burst = drain_cycles_per_burst(s, hw);
    const bool dram = spills_to_dram(layer, hw);

    if (t.eltwise) {
        const std::int64_t n = t.of_points;
        t.macs = n;
        t.psum_updates = n;
        t.if_bytes = n;
        t.fl_bytes = n;
        for (int px : tx.ext0)
            for (int py : ty.ext0)
                for (int pc : tc.ext0) t.compute_sum += ceil_div(std::int64_t{px} * py * pc, hw.macs_per_pe);
        t.dram_reads = dram ? 2 * n : 0;
        t.dram_writes = dram ? n : 0;
        return t;
    }

    t.macs = layer.dense_macs();
    t.psum_updates = t.of_points * ti.tiles * layer.fx * layer.fy;
    const std::int64_t taps = inbound_pairs(layer.ox(), layer.fx, layer.ix, layer.stride, layer.pad_x) *
                              inbound_pairs(layer.oy(), layer.fy, layer.iy, layer.stride, layer.pad_y);
    t.if_bytes = taps * icg;
    t.fl_bytes = std::int64_t{icg} * layer.oc * layer.fx * layer.fy;
    t.icp_eff = std::min<std::int64_t>(p.ic, ti.tiles);

    if (t.grouped) {
        const int ocg = layer.oc_per_group();
        for (std::int64_t toc = 0; toc < tc.trips; ++toc) {
            std::set<std::int64_t> groups;
            for (int poc = 0; poc < p.oc; ++poc) {
                const std::int64_t start = (toc * p.oc + poc) * b.oc;
                if (start < layer.oc) groups.insert(start / ocg);
            }
            t.group_visits += static_cast<std::int64_t>(groups.size());
        }
    }

    std::int64_t sx = 0, sy = 0;
    for (int v : tx.ext0) sx += v;
    for (int v : ty.ext0) sy += v;
    const std::int64_t taps_xy = sx * sy * layer.fx * layer.fy;
    if (density >= 1.0) {
        std::int64_t sc = 0, si = 0;
        for (int v : tc.ext0) sc += s.tmpl == Template::VxV ? v : ceil_div(v, hw.subbanks);
        for (int v : ti.ext0) si += dense_round_cycles(s.tmpl, b.ic, v, hw);
        t.compute_sum = taps_xy * sc * si;
    } else {
        // Steps wait for the slowest PE: mean + E[max normal] * sd per step, never
        // more than the dense step.
        const double z = expected_max_normal(array_mapping(s, hw).pes);
        std::map<std::pair<int, int>, RoundStats> memo;
        const auto stats = [&](int icn, int ocs) {
            auto it = memo.find({icn, ocs});
            if (it == memo.end()) it = memo.emplace(std::make_pair(icn, ocs), round_stats(s.tmpl, b.ic, icn, ocs, hw, density)).first;
            return it->second;
        };
        const auto hist = [](const std::vector<int>& v) {
            std::map<int, std::int64_t> h;
            for (int x : v) ++h[x];
            return h;
        };
        double sum = 0;
        for (const auto& [vi, ci] : hist(ti.ext0))
            for (const auto& [vc, cc] : hist(tc.ext0)) {
                std::int64_t dense_rounds = vc;
                double mean = 0, var = 0;
                const int dense = dense_round_cycles(s.tmpl, b.ic, vi, hw);
                if (s.tmpl == Template::VxV) {
                    const RoundStats r = stats(vi, 1);
                    mean = vc * r.mean, var = vc * r.var;
                } else {
                    const int full = vc / hw.subbanks, rest = vc % hw.subbanks;
                    const RoundStats r = stats(vi, hw.subbanks);
                    mean = full * r.mean, var = full * r.var;
                    if (rest) {
                        const RoundStats q = stats(vi, rest);
                        mean += q.mean, var += q.var;
                    }
                    dense_rounds = full + (rest ? 1 : 0);
                }
                for (const auto& [vx, cx] : hist(tx.ext0))
                    for (const auto& [vy, cy] : hist(ty.ext0)) {
                        const double pts = double(vx) * vy;
                        const double step = std::min(pts * dense_rounds * dense, pts * mean + z * std::sqrt(pts * var));
                        sum += double(cx) * cy * cc * ci * step;
                    }
            }
        t.compute_sum = std::llround(sum * layer.fx * layer.fy);
        t.macs = std::llround(static_cast<double>(t.macs) * density);
    }

    t.dram_reads = t.fl_bytes + (dram ? static_cast<std::int64_t>(layer.if_dims().volume()) : 0);
    t.dram_writes = dram ? t.of_points : 0;
    return t;
}

CostEstimate finish(const Terms& t, const ReuseSuffix& r, const HwConfig& hw) {
    CostEstimate c;
    const Trips& tr = t.tr;
    c.macs = t.macs;
    c.psum_updates = t.psum_updates;
    c.steps = tr.steps();
    AccessCounts& a = c.access;
    a.dram_reads = t.dram_reads;
    a.dram_writes = t.dram_writes;

    if (t.eltwise) {
        c.bursts = c.steps;
        a.sram_reads = t.if_bytes + t.fl_bytes;
        a.sram_writes = t.of_points;
        a.rf_reads = 2 * t.macs + 4 * t.of_points;
        a.rf_writes = t.if_bytes + t.fl_bytes + 4 * t.psum_updates;
    } else {
        const auto owned = [&](Operand op) { return r.owner == op ? r.product : std::int64_t{1}; };
        const auto in_suffix = [&](Operand op, Dim d) {
            return r.owner == op && (r.dims & (1u << idx(d)));
        };
        const std::int64_t if_fetch = t.grouped ? t.group_visits : tr[Dim::OC] / owned(Operand::IF);
        const std::int64_t sram_if = t.if_bytes * if_fetch;
        const std::int64_t rf_if =
            t.if_bytes * ((!t.grouped && r.owner == Operand::IF) ? t.oc_first : t.oc_tiles);
        const std::int64_t sram_fl = t.fl_bytes * (tr[Dim::OX] * tr[Dim::OY] / owned(Operand::FL));
        const std::int64_t rf_fl = t.fl_bytes * (in_suffix(Operand::FL, Dim::OX) ? t.ox_first : t.ox_tiles) *
                                   (in_suffix(Operand::FL, Dim::OY) ? t.oy_first : t.oy_tiles);
        const std::int64_t of_visits = tr[Dim::IC] * tr[Dim::FX] * tr[Dim::FY] / owned(Operand::OF);
        const std::int64_t spill = 4 * (of_visits - 1) * t.of_points;
        c.bursts = c.steps / owned(Operand::OF);

        a.sram_reads = sram_if + sram_fl + spill;
        a.sram_writes = t.of_points + spill;
        a.rf_reads = 2 * t.macs + 4 * t.psum_updates + 4 * t.icp_eff * of_visits * t.of_points;
        a.rf_writes = rf_if + rf_fl + 4 * t.psum_updates + spill;
    }

    c.compute_cycles = t.compute_sum + c.bursts * (hw.rf_swap_cycles + hw.flextree_fill_cycles);
    c.transfer_cycles = ceil_div(a.sram(), hw.sram_bytes_per_cycle()) + c.bursts * t.drain_per_burst;
    c.total_cycles = std::max(c.compute_cycles, c.transfer_cycles);
    c.energy = energy(c.macs, a, hw.ratios);
    return c;
}

}  // namespace flexnn::detail
