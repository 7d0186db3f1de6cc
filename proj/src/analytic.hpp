#pragma once

// Closed-form cost terms shared by analytic_cost and the schedule search.

#include "flexnn/cost_model.hpp"

namespace flexnn::detail {

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

/// Tiling of one dimension of extent E into P partitions of B points.
struct DimTiling {
    std::int64_t trips = 1;
    std::int64_t tiles = 1;    // non-empty (t, p) tiles
    std::int64_t first = 1;    // partitions with work at t = 0
    std::vector<int> ext0;     // extent held by partition 0 at each t
};
DimTiling tile_dim(int extent, int p, int b);

/// Number of (o, f) pairs along one axis whose input coordinate is in bounds.
std::int64_t inbound_pairs(int out, int filt, int in, int stride, int pad);

/// Dense cycles of one round as a function of the PE's valid IC count.
int dense_round_cycles(Template t, int icb, int icn, const HwConfig& hw);

/// Mean and variance of one round's cycles when every valid pair survives with
/// probability `density`; `ocs` FL subbanks take part in an MxM round.
/// At density 1 the mean is dense_round_cycles and the variance is zero.
struct RoundStats {
    double mean = 1.0;
    double var = 0.0;
};
RoundStats round_stats(Template t, int icb, int icn, int ocs, const HwConfig& hw, double density);

/// E[max of n standard normals].
double expected_max_normal(int n);

/// Cycles to extract one drain burst from a column.
std::int64_t drain_cycles_per_burst(const Schedule& s, const HwConfig& hw);

/// Loop-order-independent parts of the dense cost.
struct Terms {
    bool eltwise = false;
    bool grouped = false;
    Trips tr;
    std::int64_t macs = 0;
    std::int64_t psum_updates = 0;
    std::int64_t if_bytes = 0;  // one pass over every in-bounds IF tap
    std::int64_t fl_bytes = 0;
    std::int64_t of_points = 0;
    std::int64_t oc_tiles = 1, oc_first = 1;
    std::int64_t ox_tiles = 1, ox_first = 1;
    std::int64_t oy_tiles = 1, oy_first = 1;
    std::int64_t group_visits = 0;  // grouped: sum over OC trips of distinct groups
    std::int64_t icp_eff = 1;
    std::int64_t compute_sum = 0;   // PE0 cycles over all steps, no bursts
    std::int64_t drain_per_burst = 0;
    std::int64_t dram_reads = 0;
    std::int64_t dram_writes = 0;
};

Terms layer_terms(const LayerDesc& layer, const Schedule& s, const HwConfig& hw, double density = 1.0);

/// Completes the estimate for a loop order summarised by its reuse suffix.
CostEstimate finish(const Terms& t, const ReuseSuffix& r, const HwConfig& hw);

/// Whether the dense footprint of the layer's IF, FL and OF exceeds the SRAM.
bool spills_to_dram(const LayerDesc& layer, const HwConfig& hw);

}  // namespace flexnn::detail
