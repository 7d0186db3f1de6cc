#include "flexnn/schedule.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

namespace flexnn {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

unsigned bit(Dim d) { return 1u << idx(d); }

}  // namespace

void HwConfig::check() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("hw config: " + what); };
    if (rows < 1 || cols < 1) fail("array must have at least one row and column");
    if (subbanks < 1 || macs_per_pe < subbanks || macs_per_pe % subbanks != 0)
        fail("macs_per_pe must be a positive multiple of subbanks");
    if (if_rf_bytes % subbanks != 0 || fl_rf_bytes % subbanks != 0)
        fail("data RFs must split evenly into subbanks");
    if (if_rf_bytes < 1 || fl_rf_bytes < 1 || of_rf_bytes < 4 || of_rf_bytes % 4 != 0)
        fail("RF sizes must be positive (OF RF in 4-byte slots)");
    if (if_bmp_bytes * 8 != if_rf_bytes || fl_bmp_bytes * 8 != fl_rf_bytes)
        fail("bitmap RF bytes must equal data RF bytes / 8");
    if (sram_bytes < 1 || sram_port_bytes < 1 || sram_ports < 1) fail("SRAM geometry must be positive");
    if (!(freq_ghz > 0.0)) fail("freq_ghz must be positive");
    if (rf_swap_cycles < 0 || flextree_fill_cycles < 0 || ppms_per_column < 1)
        fail("overhead constants must be non-negative");
    if (ratios.pe < 0 || ratios.rf < 0 || ratios.sram < 0 || ratios.dram < 0 || ratios.noc < 0)
        fail("energy ratios must be non-negative");
}

const char* dim_name(Dim d) {
    static const char* names[] = {"OX", "OY", "IC", "OC", "FX", "FY"};
    return names[idx(d)];
}

Dim dim_from_string(const std::string& s) {
    for (Dim d : kAllDims)
        if (s == dim_name(d)) return d;
    throw std::invalid_argument("unknown loop dimension '" + s + "'");
}

bool is_permutation(const LoopOrder& o) {
    unsigned seen = 0;
    for (Dim d : o) {
        if (idx(d) < 0 || idx(d) >= kNumDims) return false;
        seen |= bit(d);
    }
    return seen == (1u << kNumDims) - 1;
}

int order_rank(const LoopOrder& o) {
    int rank = 0;
    for (int i = 0; i < kNumDims; ++i) {
        int smaller = 0;
        for (int j = i + 1; j < kNumDims; ++j)
            if (o[j] < o[i]) ++smaller;
        int fact = 1;
        for (int k = 2; k < kNumDims - i; ++k) fact *= k;
        rank += smaller * fact;
    }
    return rank;
}

LoopOrder order_from_rank(int rank) {
    if (rank < 0 || rank >= 720) throw std::out_of_range("loop order rank out of range");
    std::vector<Dim> pool(kAllDims.begin(), kAllDims.end());
    LoopOrder o{};
    for (int i = 0; i < kNumDims; ++i) {
        int fact = 1;
        for (int k = 2; k < kNumDims - i; ++k) fact *= k;
        const int pick = rank / fact;
        rank %= fact;
        o[i] = pool[pick];
        pool.erase(pool.begin() + pick);
    }
    return o;
}

std::string to_string(const LoopOrder& o) {
    std::string s;
    for (Dim d : o) {
        if (!s.empty()) s += '>';
        s += dim_name(d);
    }
    return s;
}

const char* template_name(Template t) { return t == Template::VxV ? "VxV" : "MxM"; }

Template template_from_string(const std::string& s) {
    if (s == "VxV") return Template::VxV;
    if (s == "MxM") return Template::MxM;
    throw std::invalid_argument("unknown template '" + s + "' (expected VxV|MxM)");
}

std::string summary(const Schedule& s) {
    std::ostringstream os;
    os << to_string(s.order) << ' ' << template_name(s.tmpl) << " B(IC" << s.blocking.ic << ",OC"
       << s.blocking.oc << ",OX" << s.blocking.ox << ",OY" << s.blocking.oy << ") P(IC"
       << s.partitioning.ic << ",OC" << s.partitioning.oc << ",OX" << s.partitioning.ox << ",OY"
       << s.partitioning.oy << ')';
    return os.str();
}

std::int64_t Trips::steps() const {
    std::int64_t n = 1;
    for (auto v : t) n *= v;
    return n;
}

Trips trips(const LayerDesc& layer, const Schedule& s) {
    const Factors& b = s.blocking;
    const Factors& p = s.partitioning;
    Trips tr;
    if (b.ic < 1 || b.oc < 1 || b.ox < 1 || b.oy < 1 || p.ic < 1 || p.oc < 1 || p.ox < 1 || p.oy < 1)
        throw std::invalid_argument("blocking and partitioning factors must be >= 1");
    tr.t[idx(Dim::OX)] = ceil_div(layer.ox(), std::int64_t{p.ox} * b.ox);
    tr.t[idx(Dim::OY)] = ceil_div(layer.oy(), std::int64_t{p.oy} * b.oy);
    tr.t[idx(Dim::OC)] = ceil_div(layer.oc, std::int64_t{p.oc} * b.oc);
    if (layer.op == OpType::Conv) {
        tr.t[idx(Dim::IC)] = ceil_div(layer.ic_per_group(), std::int64_t{p.ic} * b.ic);
        tr.t[idx(Dim::FX)] = layer.fx;
        tr.t[idx(Dim::FY)] = layer.fy;
    }
    return tr;
}

std::vector<Dim> active_loops(const LoopOrder& order, const Trips& tr) {
    std::vector<Dim> out;
    for (Dim d : order)
        if (tr[d] > 1) out.push_back(d);
    return out;
}

LoopOrder canonical_order(const LoopOrder& order, const Trips& tr) {
    LoopOrder out{};
    int n = 0;
    for (Dim d : kAllDims)
        if (tr[d] <= 1) out[n++] = d;
    for (Dim d : order)
        if (tr[d] > 1) out[n++] = d;
    return out;
}

unsigned irrelevant_mask(Operand op, const LayerDesc& layer) {
    const bool eltwise = layer.op == OpType::Eltwise;
    switch (op) {
        case Operand::IF:
            return (eltwise || layer.groups > 1) ? 0u : bit(Dim::OC);
        case Operand::FL:
            return eltwise ? 0u : bit(Dim::OX) | bit(Dim::OY);
        case Operand::OF:
            return bit(Dim::IC) | bit(Dim::FX) | bit(Dim::FY);
    }
    return 0;
}

std::int64_t trip_product(const Trips& tr, unsigned mask) {
    std::int64_t p = 1;
    for (Dim d : kAllDims)
        if (mask & bit(d)) p *= tr[d];
    return p;
}

ReuseSuffix reuse_suffix(const LayerDesc& layer, const LoopOrder& order, const Trips& tr) {
    ReuseSuffix r;
    for (int i = kNumDims - 1; i >= 0; --i) {
        const Dim d = order[i];
        if (tr[d] <= 1) continue;
        if (!r.owner) {
            for (Operand op : {Operand::IF, Operand::FL, Operand::OF})
                if (irrelevant_mask(op, layer) & bit(d)) r.owner = op;
            if (!r.owner) break;
        } else if (!(irrelevant_mask(*r.owner, layer) & bit(d))) {
            break;
        }
        r.dims |= bit(d);
        r.product *= tr[d];
    }
    return r;
}

std::int64_t fetches_per_tile(Operand op, const LayerDesc& layer, const ReuseSuffix& r,
                              const Trips& tr) {
    const std::int64_t all = trip_product(tr, irrelevant_mask(op, layer));
    return r.owner == op ? all / r.product : all;
}

ArrayMapping array_mapping(const Schedule& s, const HwConfig& hw) {
    ArrayMapping m;
    m.group_rows = static_cast<int>(std::bit_ceil(static_cast<unsigned>(std::max(1, s.partitioning.ic))));
    m.groups_per_column = std::max(1, hw.rows / m.group_rows);
    m.columns = static_cast<int>(ceil_div(s.partitioning.oc, m.groups_per_column)) * s.partitioning.ox *
                s.partitioning.oy;
    m.pes = s.partitioning.ic * s.partitioning.oc * s.partitioning.ox * s.partitioning.oy;
    return m;
}

std::vector<Violation> validate(const LayerDesc& layer, const Schedule& s, const HwConfig& hw) {
    std::vector<Violation> v;
    auto add = [&](const char* code, const std::string& msg) { v.push_back({code, msg}); };
    const Factors& b = s.blocking;
    const Factors& p = s.partitioning;

    if (!is_permutation(s.order)) add("loop_order", "loop order is not a permutation of the six loops");
    if (b.ic < 1 || b.oc < 1 || b.ox < 1 || b.oy < 1) add("blocking", "blocking factors must be >= 1");
    if (p.ic < 1 || p.oc < 1 || p.ox < 1 || p.oy < 1) add("partitioning", "partition factors must be >= 1");
    if (!v.empty()) return v;

    if (p.ic > hw.rows)
        add("ic_p_range", "IC_P exceeds column height: IC_P=" + std::to_string(p.ic) + " > rows=" +
                              std::to_string(hw.rows));

    const int icg = layer.op == OpType::Eltwise ? 1 : layer.ic_per_group();
    if (layer.op == OpType::Eltwise && (p.ic != 1 || b.ic != 1))
        add("eltwise", "eltwise layers require IC_P=1 and IC_B=1");
    const std::int64_t covered = std::int64_t{p.ic} * b.ic;
    if (ceil_div(icg, covered) == 1 && covered - icg >= b.ic)
        add("ic_tiling", "IC_P*IC_B - IC = " + std::to_string(covered - icg) + " leaves an idle IC partition (IC_B=" +
                             std::to_string(b.ic) + ")");
    if (layer.op == OpType::Conv && layer.groups > 1 && layer.oc_per_group() % b.oc != 0)
        add("group_alignment", "OC_B=" + std::to_string(b.oc) + " does not divide OC per group " +
                                   std::to_string(layer.oc_per_group()));

    const int pts = s.points();
    if (s.tmpl == Template::VxV || layer.op == OpType::Eltwise) {
        const int if_bytes = layer.op == OpType::Eltwise ? pts * b.oc : pts * b.ic;
        const int fl_bytes = layer.op == OpType::Eltwise ? pts * b.oc : b.oc * b.ic;
        if (if_bytes > hw.if_rf_bytes)
            add("if_rf_capacity", "IF tile " + std::to_string(if_bytes) + " B exceeds IF RF " +
                                      std::to_string(hw.if_rf_bytes) + " B");
        if (fl_bytes > hw.fl_rf_bytes)
            add("fl_rf_capacity", "FL tile " + std::to_string(fl_bytes) + " B exceeds FL RF " +
                                      std::to_string(hw.fl_rf_bytes) + " B");
    } else {
        if (b.ic > hw.subbank_bytes())
            add("if_rf_capacity", "MxM IC_B=" + std::to_string(b.ic) + " exceeds subbank " +
                                      std::to_string(hw.subbank_bytes()) + " B");
        if (pts > hw.subbanks)
            add("if_rf_capacity", "MxM needs one IF subbank per point: " + std::to_string(pts) + " > " +
                                      std::to_string(hw.subbanks));
        if (b.oc > hw.subbanks)
            add("fl_rf_capacity", "MxM needs one FL subbank per OC: OC_B=" + std::to_string(b.oc) +
                                      " > " + std::to_string(hw.subbanks));
    }
    if (pts * b.oc > hw.of_slots())
        add("of_rf_capacity", "OF tile " + std::to_string(pts * b.oc) + " psums exceeds " +
                                  std::to_string(hw.of_slots()) + " OF RF slots");

    if (p.ic <= hw.rows) {
        const ArrayMapping m = array_mapping(s, hw);
        if (m.columns > hw.cols)
            add("columns", "mapping needs " + std::to_string(m.columns) + " columns > " +
                               std::to_string(hw.cols));
        if (m.pes > hw.pes())
            add("pe_count", "mapping needs " + std::to_string(m.pes) + " PEs > " + std::to_string(hw.pes()));
    }
    return v;
}

void require_valid(const LayerDesc& layer, const Schedule& s, const HwConfig& hw) {
    auto v = validate(layer, s, hw);
    if (v.empty()) return;
    std::string msg = "invalid schedule for layer '" + layer.id + "':";
    for (const auto& x : v) msg += " [" + x.code + "] " + x.message + ";";
    throw ScheduleError(msg);
}

}  // namespace flexnn
