#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flexnn/hw_config.hpp"
#include "flexnn/schedule.hpp"
#include "flexnn/sim.hpp"
#include "flexnn/tensor.hpp"

namespace flexnn {

enum class Objective { Energy, Cycles, Edp };
const char* objective_name(Objective o);
Objective objective_from_string(const std::string& s);

/// Normalized energy; one unit is one MAC.
struct EnergyReport {
    double pe = 0, rf = 0, sram = 0, dram = 0, noc = 0;

    double total() const { return pe + rf + sram + dram + noc; }
    EnergyReport& operator+=(const EnergyReport& o);
};

EnergyReport energy(std::int64_t macs_executed, const AccessCounts& a, const EnergyRatios& r);
EnergyReport energy(const SimResult& res, const EnergyRatios& r);

/// Operand sparsity a sparse mode is expected to see; ranks schedules for that mode.
struct SparsityHint {
    SparsityMode mode = SparsityMode::Dense;
    double weight_sparsity = 0.0;
    double act_sparsity = 0.0;

    /// Probability that a MAC pair survives skipping.
    double pair_density() const;
};

/// Closed-form evaluation of a schedule. Under the dense hint, access counts,
/// MACs and compute_cycles equal simulate_layer in dense mode exactly; total_cycles
/// is max(compute, transfer) over the whole layer, a lower bound on the simulated
/// total. Under a sparse hint, MACs, RF traffic and compute_cycles are expectations
/// for i.i.d. masks; SRAM and DRAM traffic stay dense.
struct CostEstimate {
    std::int64_t macs = 0;
    std::int64_t psum_updates = 0;
    std::int64_t steps = 0;
    std::int64_t bursts = 0;
    std::int64_t compute_cycles = 0;
    std::int64_t transfer_cycles = 0;
    std::int64_t total_cycles = 0;
    AccessCounts access;
    EnergyReport energy;

    double objective(Objective o) const;
};

/// Uses hw.ratios for the energy terms.
CostEstimate analytic_cost(const LayerDesc& layer, const Schedule& s, const HwConfig& hw,
                           const SparsityHint& hint = {});

struct SearchResult {
    Schedule schedule;
    CostEstimate cost;
    std::size_t factor_sets = 0;
    /// Distinct (factor set, loop order) schedules covered.
    std::size_t candidates = 0;
};

/// Argmin of the objective over enumerate(layer, hw, unlimited). Ties go to
/// fewer SRAM bytes, then the earlier schedule in canonical order.
/// Throws ScheduleError when no schedule maps.
SearchResult find_optimal(const LayerDesc& layer, const HwConfig& hw, Objective obj,
                          const SparsityHint& hint = {});
/// Single-threaded reference for find_optimal.
SearchResult find_optimal_serial(const LayerDesc& layer, const HwConfig& hw, Objective obj,
                                 const SparsityHint& hint = {});

// --- fixed-schedule baselines ---------------------------------------------

enum class Dataflow { RowStationary, NonlocalReuse, Flexible };

struct BaselineSpec {
    std::string name;
    Dataflow dataflow = Dataflow::Flexible;
    EnergyRatios ratios;
    int pe_count = 256;
    int rf_bytes = 208;
};

BaselineSpec eyeriss_spec();
BaselineSpec tpu_spec();
BaselineSpec flexnn_spec();
/// eyeriss | tpu | flexnn
BaselineSpec baseline_from_name(const std::string& name);

/// The dataflow's fixed schedule in FlexNN's vocabulary; always a member of
/// enumerate(layer, hw, unlimited). Throws ScheduleError if it cannot map.
Schedule baseline_schedule(const BaselineSpec& b, const LayerDesc& layer, const HwConfig& hw);

/// Psum bytes forwarded between PE rows (row-stationary only).
std::int64_t forwarded_psum_bytes(const BaselineSpec& b, const LayerDesc& layer, const Schedule& s);

struct CompareRow {
    std::string baseline;
    Schedule schedule;
    double energy_baseline = 0;
    double energy_flexnn = 0;
    /// (E_base - E_flex) / E_base
    double reduction = 0;
};

struct Comparison {
    Schedule flexnn_schedule;
    double energy_flexnn = 0;
    std::vector<CompareRow> rows;
};

struct CompareOptions {
    /// Evaluate baselines with the FlexNN ratios instead of their own.
    bool equal_ratios = false;
    SparsityMode mode = SparsityMode::Dense;
};

/// Simulates the FlexNN optimum and each baseline schedule on the same operands.
Comparison compare(const LayerDesc& layer, const Tensor4& ifmap, const Tensor4& filters,
                   const std::vector<BaselineSpec>& specs, const HwConfig& hw, const CompareOptions& opt = {});

/// Shape-only comparison with the dense analytic model.
Comparison compare_analytic(const LayerDesc& layer, const std::vector<BaselineSpec>& specs,
                            const HwConfig& hw, bool equal_ratios = false);

}  // namespace flexnn
