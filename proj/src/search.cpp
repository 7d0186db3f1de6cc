#include <array>
#include <map>
#include <tuple>

#include <omp.h>

#include "analytic.hpp"
#include "flexnn/cost_model.hpp"

namespace flexnn {

namespace {

/// Every order with the same reuse suffix (owner, dims) costs the same, so only
/// the lowest-rank representative of each signature is evaluated.
struct Signature {
    std::optional<Operand> owner;
    unsigned dims = 0;
    int rank = 0;  // lowest representative
};

struct OrderClass {
    std::vector<Signature> sigs;
    std::size_t orders = 0;  // distinct representatives
};

unsigned active_mask(const Trips& tr) {
    unsigned m = 0;
    for (Dim d : kAllDims)
        if (tr[d] > 1) m |= 1u << idx(d);
    return m;
}

std::array<OrderClass, 64> order_classes(const LayerDesc& layer) {
    std::array<OrderClass, 64> out;
    for (unsigned mask = 0; mask < 64; ++mask) {
        Trips tr;
        for (Dim d : kAllDims) tr.t[idx(d)] = (mask & (1u << idx(d))) ? 2 : 1;
        std::map<std::pair<int, unsigned>, int> seen;
        OrderClass& oc = out[mask];
        for (int r = 0; r < 720; ++r) {
            const LoopOrder o = order_from_rank(r);
            if (canonical_order(o, tr) != o) continue;
            ++oc.orders;
            const ReuseSuffix rs = reuse_suffix(layer, o, tr);
            const int owner = rs.owner ? static_cast<int>(*rs.owner) : -1;
            if (seen.emplace(std::make_pair(owner, rs.dims), r).second) oc.sigs.push_back({rs.owner, rs.dims, r});
        }
    }
    return out;
}

struct Best {
    bool found = false;
    double obj = 0;
    std::int64_t sram = 0;
    std::size_t fi = 0;
    int rank = 0;
    CostEstimate cost;

    bool better(double o, std::int64_t s, std::size_t f, int r) const {
        return !found || std::tie(o, s, f, r) < std::tie(obj, sram, fi, rank);
    }
    void offer(const Best& b) {
        if (b.found && better(b.obj, b.sram, b.fi, b.rank)) *this = b;
    }
};

Best scan(const LayerDesc& layer, const HwConfig& hw, Objective objective, double density, const FactorSet& fs,
          std::size_t fi, const std::array<OrderClass, 64>& classes, std::size_t& candidates) {
    Best best;
    Schedule s;
    s.tmpl = fs.tmpl;
    s.blocking = fs.blocking;
    s.partitioning = fs.partitioning;
    const detail::Terms t = detail::layer_terms(layer, s, hw, density);
    const OrderClass& oc = classes[active_mask(t.tr)];
    candidates += oc.orders;
    for (const Signature& sig : oc.sigs) {
        ReuseSuffix rs;
        rs.owner = sig.owner;
        rs.dims = sig.dims;
        rs.product = trip_product(t.tr, sig.dims);
        CostEstimate c = detail::finish(t, rs, hw);
        const double o = c.objective(objective);
        const std::int64_t sram = c.access.sram();
        if (best.better(o, sram, fi, sig.rank)) {
            best.found = true;
            best.obj = o;
            best.sram = sram;
            best.fi = fi;
            best.rank = sig.rank;
            best.cost = c;
        }
    }
    return best;
}

SearchResult assemble(const LayerDesc& layer, const std::vector<FactorSet>& sets, const Best& best,
                      std::size_t candidates) {
    if (!best.found) throw ScheduleError("layer '" + layer.id + "' has no schedule that fits the RF and array constraints");
    SearchResult r;
    const FactorSet& fs = sets[best.fi];
    r.schedule.tmpl = fs.tmpl;
    r.schedule.blocking = fs.blocking;
    r.schedule.partitioning = fs.partitioning;
    r.schedule.order = order_from_rank(best.rank);
    r.cost = best.cost;
    r.factor_sets = sets.size();
    r.candidates = candidates;
    return r;
}

}  // namespace

SearchResult find_optimal_serial(const LayerDesc& layer, const HwConfig& hw, Objective obj,
                                 const SparsityHint& hint) {
    layer.check();
    hw.check();
    const std::vector<FactorSet> sets = factor_sets(layer, hw);
    const auto classes = order_classes(layer);
    Best best;
    std::size_t candidates = 0;
    const double density = hint.pair_density();
    for (std::size_t i = 0; i < sets.size(); ++i) best.offer(scan(layer, hw, obj, density, sets[i], i, classes, candidates));
    return assemble(layer, sets, best, candidates);
}

SearchResult find_optimal(const LayerDesc& layer, const HwConfig& hw, Objective obj, const SparsityHint& hint) {
    layer.check();
    hw.check();
    const std::vector<FactorSet> sets = factor_sets(layer, hw);
    const auto classes = order_classes(layer);
    Best best;
    std::size_t candidates = 0;
    const double density = hint.pair_density();
    const auto n = static_cast<std::int64_t>(sets.size());
#pragma omp parallel
    {
        Best local;
        std::size_t local_candidates = 0;
#pragma omp for schedule(dynamic, 8) nowait
        for (std::int64_t i = 0; i < n; ++i)
            local.offer(scan(layer, hw, obj, density, sets[static_cast<std::size_t>(i)], static_cast<std::size_t>(i), classes,
                             local_candidates));
#pragma omp critical(flexnn_search_reduce)
        {
            best.offer(local);
            candidates += local_candidates;
        }
    }
    return assemble(layer, sets, best, candidates);
}

}  // namespace flexnn
