#include "flexnn/cost_model.hpp"

#include <algorithm>

#include "analytic.hpp"

namespace flexnn {

const char* objective_name(Objective o) {
    switch (o) {
        case Objective::Energy: return "energy";
        case Objective::Cycles: return "cycles";
        case Objective::Edp: return "edp";
    }
    return "?";
}

Objective objective_from_string(const std::string& s) {
    if (s == "energy") return Objective::Energy;
    if (s == "cycles") return Objective::Cycles;
    if (s == "edp") return Objective::Edp;
    throw std::invalid_argument("unknown objective '" + s + "' (expected energy|cycles|edp)");
}

EnergyReport& EnergyReport::operator+=(const EnergyReport& o) {
    pe += o.pe;
    rf += o.rf;
    sram += o.sram;
    dram += o.dram;
    noc += o.noc;
    return *this;
}

EnergyReport energy(std::int64_t macs_executed, const AccessCounts& a, const EnergyRatios& r) {
    EnergyReport e;
    e.pe = static_cast<double>(macs_executed) * r.pe;
    e.rf = static_cast<double>(a.rf()) * r.rf;
    e.sram = static_cast<double>(a.sram()) * r.sram;
    e.dram = static_cast<double>(a.dram()) * r.dram;
    e.noc = static_cast<double>(a.noc_bytes) * r.noc;
    return e;
}

EnergyReport energy(const SimResult& res, const EnergyRatios& r) { return energy(res.macs_executed, res.access, r); }

double CostEstimate::objective(Objective o) const {
    switch (o) {
        case Objective::Energy: return energy.total();
        case Objective::Cycles: return static_cast<double>(total_cycles);
        case Objective::Edp: return energy.total() * static_cast<double>(total_cycles);
    }
    return 0;
}

double SparsityHint::pair_density() const {
    const double w = 1.0 - weight_sparsity, a = 1.0 - act_sparsity;
    switch (mode) {
        case SparsityMode::Dense: return 1.0;
        case SparsityMode::WeightSided: return w;
        case SparsityMode::TwoSided: return w * a;
    }
    return 1.0;
}

CostEstimate analytic_cost(const LayerDesc& layer, const Schedule& s, const HwConfig& hw, const SparsityHint& hint) {
    require_valid(layer, s, hw);
    const detail::Terms t = detail::layer_terms(layer, s, hw, hint.pair_density());
    return detail::finish(t, reuse_suffix(layer, s.order, t.tr), hw);
}

// --- baselines --------------------------------------------------------------

BaselineSpec eyeriss_spec() { return {"eyeriss", Dataflow::RowStationary, kEyerissRatios, 168, 512}; }
BaselineSpec tpu_spec() { return {"tpu", Dataflow::NonlocalReuse, kTpuRatios, 256, 32}; }
BaselineSpec flexnn_spec() { return {"flexnn", Dataflow::Flexible, kFlexnnRatios, 256, 208}; }

BaselineSpec baseline_from_name(const std::string& name) {
    if (name == "eyeriss") return eyeriss_spec();
    if (name == "tpu") return tpu_spec();
    if (name == "flexnn") return flexnn_spec();
    throw std::invalid_argument("unknown baseline '" + name + "' (expected eyeriss|tpu|flexnn)");
}

namespace {

constexpr LoopOrder kRowStationaryOrder = {Dim::OC, Dim::IC, Dim::FY, Dim::OY, Dim::OX, Dim::FX};
constexpr LoopOrder kNonlocalOrder = {Dim::OC, Dim::OY, Dim::OX, Dim::FY, Dim::FX, Dim::IC};

int largest_at_most(const std::vector<int>& v, int cap) {
    int best = 0;
    for (int x : v)
        if (x <= cap) best = std::max(best, x);
    return best;
}

int smallest_at_least(const std::vector<int>& v, int floor) {
    for (int x : v)
        if (x >= floor) return x;
    return v.empty() ? 0 : v.back();
}

/// Largest grid OC_P keeping the mapping inside the array and the PE budget.
int widest_oc_partition(const LayerDesc& layer, Schedule s, const HwConfig& hw, int pe_budget, int cap) {
    int best = 1;
    for (int p : partition_grid(layer.oc, s.blocking.oc, cap)) {
        s.partitioning.oc = p;
        const ArrayMapping m = array_mapping(s, hw);
        if (m.columns <= hw.cols && m.pes <= std::min(pe_budget, hw.pes())) best = p;
    }
    return best;
}

}  // namespace

Schedule baseline_schedule(const BaselineSpec& b, const LayerDesc& layer, const HwConfig& hw) {
    if (b.dataflow == Dataflow::Flexible) return find_optimal(layer, hw, Objective::Energy).schedule;
    Schedule s;
    s.tmpl = Template::VxV;
    if (layer.op == OpType::Eltwise) {
        // Channels spread over rows, one point per PE.
        s.blocking.oc = largest_at_most(block_grid(layer.oc, 1, hw.of_slots()), hw.of_slots());
        s.partitioning.oc = widest_oc_partition(layer, s, hw, b.pe_count, hw.pes());
        s.order = canonical_order(kCanonicalOrder, trips(layer, s));
        require_valid(layer, s, hw);
        return s;
    }
    const int icg = layer.ic_per_group();
    if (b.dataflow == Dataflow::RowStationary) {
        s.blocking.ic = smallest_at_least(ic_block_grid(icg, 1, hw.if_rf_bytes), std::min(4, icg));
        s.blocking.ox = largest_at_most(block_grid(layer.ox(), 1, hw.of_slots()),
                                        std::min(hw.of_slots(), hw.if_rf_bytes / s.blocking.ic));
        s.partitioning.oc = widest_oc_partition(layer, s, hw, b.pe_count, 8);
        const int cols_per_oy = array_mapping(s, hw).columns;
        s.partitioning.oy = largest_at_most(partition_grid(layer.oy(), 1, hw.cols), hw.cols / cols_per_oy);
        while (array_mapping(s, hw).pes > b.pe_count && s.partitioning.oy > 1) s.partitioning.oy /= 2;
        s.order = canonical_order(kRowStationaryOrder, trips(layer, s));
    } else {
        // Widest IC partition whose IC tiling leaves no idle row.
        auto icps = ic_partition_grid(icg, hw.rows);
        std::sort(icps.rbegin(), icps.rend());
        for (int icp : icps) {
            if (icp > 16) continue;
            s.partitioning.ic = icp;
            s.blocking.ic = largest_at_most(ic_block_grid(icg, icp, hw.subbank_bytes()), hw.subbank_bytes());
            s.partitioning.oc = 1;
            s.partitioning.oc = widest_oc_partition(layer, s, hw, b.pe_count, hw.pes());
            s.order = canonical_order(kNonlocalOrder, trips(layer, s));
            if (is_valid(layer, s, hw)) break;
        }
    }
    require_valid(layer, s, hw);
    return s;
}

std::int64_t forwarded_psum_bytes(const BaselineSpec& b, const LayerDesc& layer, const Schedule& s) {
    if (b.dataflow != Dataflow::RowStationary || layer.op != OpType::Conv) return 0;
    const std::int64_t ic_tiles = detail::ceil_div(layer.ic_per_group(), s.blocking.ic);
    const std::int64_t points = std::int64_t{layer.ox()} * layer.oy() * layer.oc;
    return 4 * (layer.fy - 1) * points * ic_tiles;
}

namespace {

double reduction(double base, double flex) { return base > 0 ? (base - flex) / base : 0.0; }

}  // namespace

Comparison compare(const LayerDesc& layer, const Tensor4& ifmap, const Tensor4& filters,
                   const std::vector<BaselineSpec>& specs, const HwConfig& hw, const CompareOptions& opt) {
    SimOptions so;
    so.mode = opt.mode;
    so.functional = false;
    Comparison c;
    c.flexnn_schedule = find_optimal(layer, hw, Objective::Energy).schedule;
    const SimResult flex = simulate_layer(layer, c.flexnn_schedule, ifmap, filters, hw, so);
    c.energy_flexnn = energy(flex, hw.ratios).total();
    for (const BaselineSpec& b : specs) {
        CompareRow row;
        row.baseline = b.name;
        row.schedule = b.dataflow == Dataflow::Flexible ? c.flexnn_schedule : baseline_schedule(b, layer, hw);
        SimResult res = simulate_layer(layer, row.schedule, ifmap, filters, hw, so);
        res.access.noc_bytes += forwarded_psum_bytes(b, layer, row.schedule);
        row.energy_baseline = energy(res, opt.equal_ratios ? hw.ratios : b.ratios).total();
        row.energy_flexnn = c.energy_flexnn;
        row.reduction = reduction(row.energy_baseline, row.energy_flexnn);
        c.rows.push_back(row);
    }
    return c;
}

Comparison compare_analytic(const LayerDesc& layer, const std::vector<BaselineSpec>& specs, const HwConfig& hw,
                            bool equal_ratios) {
    Comparison c;
    const SearchResult best = find_optimal(layer, hw, Objective::Energy);
    c.flexnn_schedule = best.schedule;
    c.energy_flexnn = best.cost.energy.total();
    for (const BaselineSpec& b : specs) {
        CompareRow row;
        row.baseline = b.name;
        row.schedule = b.dataflow == Dataflow::Flexible ? c.flexnn_schedule : baseline_schedule(b, layer, hw);
        HwConfig bhw = hw;
        if (!equal_ratios) bhw.ratios = b.ratios;
        CostEstimate est = analytic_cost(layer, row.schedule, bhw);
        est.access.noc_bytes += forwarded_psum_bytes(b, layer, row.schedule);
        row.energy_baseline = energy(est.macs, est.access, bhw.ratios).total();
        row.energy_flexnn = c.energy_flexnn;
        row.reduction = reduction(row.energy_baseline, row.energy_flexnn);
        c.rows.push_back(row);
    }
    return c;
}

}  // namespace flexnn
