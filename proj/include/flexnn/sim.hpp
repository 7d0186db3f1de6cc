#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flexnn/hw_config.hpp"
#include "flexnn/schedule.hpp"
#include "flexnn/tensor.hpp"

namespace flexnn {

enum class SparsityMode { Dense, WeightSided, TwoSided };
const char* mode_name(SparsityMode m);
/// Accepts dense|weight|two and the long forms weight_sided|two_sided.
SparsityMode mode_from_string(const std::string& s);
inline constexpr std::array<SparsityMode, 3> kAllModes = {SparsityMode::Dense, SparsityMode::WeightSided,
                                                          SparsityMode::TwoSided};

/// Bytes moved at each level.
struct AccessCounts {
    std::int64_t rf_reads = 0;
    std::int64_t rf_writes = 0;
    std::int64_t sram_reads = 0;
    std::int64_t sram_writes = 0;
    std::int64_t dram_reads = 0;
    std::int64_t dram_writes = 0;
    /// Inter-PE psum forwarding (baselines only).
    std::int64_t noc_bytes = 0;

    std::int64_t rf() const { return rf_reads + rf_writes; }
    std::int64_t sram() const { return sram_reads + sram_writes; }
    std::int64_t dram() const { return dram_reads + dram_writes; }
    AccessCounts& operator+=(const AccessCounts& o);
    bool operator==(const AccessCounts&) const = default;
};
AccessCounts operator+(AccessCounts a, const AccessCounts& b);

// --- VPE primitives ---------------------------------------------------------

inline constexpr int kSubbankLen = 16;

/// Presence bits over one RF block, bit i = byte i.
struct Bitmap {
    std::uint16_t bits = 0;
    int len = kSubbankLen;

    int popcount() const;
    bool test(int i) const { return (bits >> i) & 1u; }
    bool operator==(const Bitmap&) const = default;
};

Bitmap make_bitmap(std::span<const std::int8_t> dense);
/// Throws std::invalid_argument on length mismatch.
Bitmap combine_bitmaps(const Bitmap& if_bmp, const Bitmap& fl_bmp);
/// (rank in if_bmp, rank in fl_bmp) for each set bit of csb, ascending.
/// Throws std::invalid_argument unless csb == if_bmp AND fl_bmp.
std::vector<std::pair<int, int>> cag_pairs(const Bitmap& csb, const Bitmap& if_bmp, const Bitmap& fl_bmp);

/// One compressed-data subbank and its bitmap; cd holds popcount(bmp) bytes.
struct Subbank {
    Bitmap bmp{0, 0};
    std::array<std::int8_t, kSubbankLen> cd{};

    static Subbank compress(std::span<const std::int8_t> dense, int len);
    /// Every byte stored, zeros included; bitmap marks the first `valid` positions.
    static Subbank raw(std::span<const std::int8_t> dense, int len);
};

struct VpeState {
    std::array<Subbank, 4> if_sb{};
    std::array<Subbank, 4> fl_sb{};
    std::array<std::int32_t, 16> of{};
};

struct RoundResult {
    int cycles = 1;
    int macs = 0;
    int psum_updates = 0;
    /// MACs per lane, subbank-major.
    std::vector<int> lane_macs;
};

/// VxV: subbank pairs (IF_i, FL_i) all accumulate into of[of_slot].
/// MxM: IF subbank `select` against FL_j, accumulating into of[of_slot + j].
/// Each subbank is served by `lanes` MAC lanes over contiguous slices.
RoundResult vpe_round(VpeState& st, Template tmpl, int select, int of_slot, int lanes);

/// Cycles of a round from combined bitmaps alone (no arithmetic).
int round_cycles(std::span<const Bitmap> csbs, int lanes);

inline constexpr int kFlexTreeLanes = 16;
inline constexpr std::array<int, 5> kFlexTreeTaps = {8, 8, 4, 2, 1};

struct FlexTreeResult {
    std::vector<std::int32_t> outputs;
    int tap_level = 0;
    int taps_per_round = 8;
    /// Rounds to extract all outputs through min(taps, ppms) ports.
    int extract_rounds = 0;
};

/// Sums each aligned block of pow2ceil(ic_p) lanes (lanes past ic_p in a block carry zero).
FlexTreeResult flextree_accumulate(std::span<const std::int32_t> lanes, int ic_p, int ppms = 4);

// --- layer simulation -------------------------------------------------------

struct SimOptions {
    SparsityMode mode = SparsityMode::TwoSided;
    /// When false only counters are produced (no MAC arithmetic, empty ofmap).
    bool functional = true;
    Requant requant{1, 8, false};
    /// Per-round lane occupancy CSV.
    std::ostream* trace = nullptr;
};

struct SimResult {
    Tensor4 ofmap;
    AccTensor4 psums;
    bool functional = false;

    std::int64_t compute_cycles = 0;
    std::int64_t transfer_cycles = 0;
    std::int64_t total_cycles = 0;
    /// Same schedule with every MAC executed.
    std::int64_t dense_cycles = 0;

    std::int64_t macs_executed = 0;
    std::int64_t macs_skipped = 0;
    std::int64_t psum_updates = 0;
    std::int64_t steps = 0;
    std::int64_t drain_bursts = 0;
    AccessCounts access;

    std::int64_t dense_macs() const { return macs_executed + macs_skipped; }
};

class SimError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Convolution: `ifmap` is the IF volume, `filters` is (FX, FY, IC/groups, OC).
/// Eltwise: `ifmap` and `filters` are the two addends with identical dims.
SimResult simulate_layer(const LayerDesc& layer, const Schedule& s, const Tensor4& ifmap,
                         const Tensor4& filters, const HwConfig& hw, const SimOptions& opt = {});

/// Bytes to move one vector under the given compression: min(dense, ZVC footprint).
std::int64_t vector_bytes(std::span<const std::int8_t> v, bool compressed);

}  // namespace flexnn
