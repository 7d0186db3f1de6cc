#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace flexnn {

/// Energy per unit of work, normalized so one MAC costs `pe`.
/// rf/sram/dram are per byte moved.
struct EnergyRatios {
    double pe = 1.0;
    double rf = 0.125;
    double sram = 6.0;
    double dram = 200.0;
    /// Inter-PE forwarding, only charged by baselines that forward psums.
    double noc = 0.0;

    bool operator==(const EnergyRatios&) const = default;
};

inline constexpr EnergyRatios kFlexnnRatios{1.0, 0.125, 6.0, 200.0, 0.0};
inline constexpr EnergyRatios kEyerissRatios{1.0, 1.0, 6.0, 200.0, 2.0};
inline constexpr EnergyRatios kTpuRatios{1.0, 0.06, 6.0, 200.0, 0.0};

struct HwConfig {
    int rows = 16;
    int cols = 16;
    int macs_per_pe = 8;
    int subbanks = 4;
    int if_rf_bytes = 64;
    int fl_rf_bytes = 64;
    int of_rf_bytes = 64;
    int if_bmp_bytes = 8;
    int fl_bmp_bytes = 8;
    std::int64_t sram_bytes = 1536 * 1024;
    int sram_port_bytes = 32;
    /// One load/drain port per column.
    int sram_ports = 16;
    double freq_ghz = 1.8;
    EnergyRatios ratios{};

    int rf_swap_cycles = 1;
    int flextree_fill_cycles = 4;
    int ppms_per_column = 4;

    int pes() const { return rows * cols; }
    int subbank_bytes() const { return if_rf_bytes / subbanks; }
    int of_slots() const { return of_rf_bytes / 4; }
    int lanes_per_subbank() const { return macs_per_pe / subbanks; }
    std::int64_t sram_bytes_per_cycle() const { return std::int64_t{sram_port_bytes} * sram_ports; }
    double peak_tops() const { return double(rows) * cols * macs_per_pe * 2.0 * freq_ghz / 1000.0; }

    /// Throws std::invalid_argument on inconsistent geometry.
    void check() const;

    bool operator==(const HwConfig&) const = default;
};

}  // namespace flexnn
