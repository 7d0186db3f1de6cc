#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "flexnn/config_io.hpp"
#include "flexnn/cost_model.hpp"

namespace flexnn {

/// Overwrites each layer's sparsity: the stats entry with the same id, else
/// the network-level pair.
void apply_sparsity(NetworkConfig& net, const SparsityStats& stats);
void apply_sparsity(NetworkConfig& net, double ws, double as);

struct RunOptions {
    Objective objective = Objective::Energy;
    /// Mode used for baseline comparison and traces.
    SparsityMode mode = SparsityMode::TwoSided;
    std::vector<BaselineSpec> baselines;
    bool equal_ratios = false;
    std::uint64_t seed = 1;
    /// Abort on the first unmappable layer instead of listing it.
    bool strict = false;
    /// Feed each layer's ofmap into the next instead of synthesizing inputs.
    bool chain = false;
    /// false: schedules and analytic estimates only.
    bool simulate = true;
    /// Run only the first `limit` layers (0: all).
    std::size_t limit = 0;
    /// Per-round traces of `mode`, one CSV per layer, when non-empty.
    std::string trace_dir;
    /// Schedule overrides by layer id; "*" applies to every layer.
    std::map<std::string, Schedule> schedules;
};

struct ModeResult {
    Schedule schedule;
    std::int64_t compute_cycles = 0;
    std::int64_t total_cycles = 0;
    std::int64_t macs_executed = 0;
    double energy = 0;
    AccessCounts access;
};

struct LayerRow {
    std::string id;
    OpType op = OpType::Conv;
    std::int64_t dense_macs = 0;
    double ws = 0, as = 0;
    /// Indexed by SparsityMode.
    std::array<ModeResult, 3> modes;
    /// (baseline, energy reduction) in RunOptions order.
    std::vector<std::pair<std::string, double>> reductions;
    /// Non-empty when the layer could not be mapped.
    std::string error;

    const ModeResult& at(SparsityMode m) const { return modes[static_cast<std::size_t>(m)]; }
    /// Dense-run compute cycles over the mode's.
    double speedup(SparsityMode m) const;
};

struct NetworkSummary {
    std::string name;
    std::size_t layers = 0;
    std::size_t failed = 0;
    std::array<std::int64_t, 3> cycles{};
    std::array<double, 3> energy{};
    double speedup_weight = 1.0;
    double speedup_two = 1.0;
};

struct RunReport {
    std::string network;
    std::uint64_t seed = 1;
    Objective objective = Objective::Energy;
    SparsityMode mode = SparsityMode::TwoSided;
    bool simulated = true;
    HwConfig hw;
    std::vector<std::string> baselines;
    std::vector<LayerRow> rows;
    NetworkSummary summary;
};

/// Schedules (per mode, at each layer's sparsity), simulates and compares every
/// layer. Layers run in parallel; rows come back in network order.
RunReport run_network(const NetworkConfig& net, const HwConfig& hw, const RunOptions& opt);

/// Network speedup = total dense cycles / total mode cycles over mapped rows.
/// Throws std::invalid_argument on empty rows.
NetworkSummary aggregate(const std::string& name, const std::vector<LayerRow>& rows);

/// exp(mean(log x)); throws std::invalid_argument on empty or non-positive input.
double geomean(const std::vector<double>& xs);

/// RFC 4180 (CRLF line ends, quoted fields where needed).
void write_csv(std::ostream& os, const RunReport& r);
/// Rows of a report written by write_csv (schedules are not recovered).
std::vector<LayerRow> read_csv(std::istream& is);
Json report_to_json(const RunReport& r);
void write_markdown(std::ostream& os, const std::string& name, const std::vector<LayerRow>& rows);

/// report.csv and report.json under `dir` (created if missing).
void write_report(const std::string& dir, const RunReport& r);

}  // namespace flexnn
