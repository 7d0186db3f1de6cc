#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flexnn/hw_config.hpp"
#include "flexnn/tensor.hpp"

namespace flexnn {

enum class Dim : std::uint8_t { OX = 0, OY, IC, OC, FX, FY };
inline constexpr int kNumDims = 6;
inline constexpr std::array<Dim, kNumDims> kAllDims = {Dim::OX, Dim::OY, Dim::IC,
                                                     Dim::OC, Dim::FX, Dim::FY};

const char* dim_name(Dim d);
Dim dim_from_string(const std::string& s);
inline int idx(Dim d) { return static_cast<int>(d); }

/// Temporal loop order, outermost first.
using LoopOrder = std::array<Dim, kNumDims>;
inline constexpr LoopOrder kCanonicalOrder = kAllDims;

/// Lexicographic rank of the permutation (0..719).
int order_rank(const LoopOrder& o);
LoopOrder order_from_rank(int rank);
bool is_permutation(const LoopOrder& o);
std::string to_string(const LoopOrder& o);

enum class Template { VxV, MxM };
const char* template_name(Template t);
Template template_from_string(const std::string& s);

struct Factors {
    int ic = 1, oc = 1, ox = 1, oy = 1;
    bool operator==(const Factors&) const = default;
};

struct Schedule {
    LoopOrder order = kCanonicalOrder;
    Factors blocking;
    Factors partitioning;
    Template tmpl = Template::VxV;

    int points() const { return blocking.ox * blocking.oy; }
    bool operator==(const Schedule&) const = default;
};

std::string summary(const Schedule& s);

/// Temporal trip counts of each loop; one FX/FY tap per step.
struct Trips {
    std::array<std::int64_t, kNumDims> t{1, 1, 1, 1, 1, 1};

    std::int64_t operator[](Dim d) const { return t[idx(d)]; }
    std::int64_t steps() const;
};

/// Trips for the (per-group) loop nest. Eltwise layers use the channel count as OC.
Trips trips(const LayerDesc& layer, const Schedule& s);

/// Loops whose trip count exceeds one, in `s.order` order.
std::vector<Dim> active_loops(const LoopOrder& order, const Trips& tr);

/// Order with unit-trip loops hoisted outermost in canonical order; the
/// representative of its equivalence class.
LoopOrder canonical_order(const LoopOrder& order, const Trips& tr);

enum class Operand { IF, FL, OF };

/// Loops an operand's tile does not depend on, as a bitmask over Dim.
/// IF depends on OC only for grouped layers; eltwise operands depend on every loop.
unsigned irrelevant_mask(Operand op, const LayerDesc& layer);

/// The maximal run of innermost non-unit loops that one operand does not depend
/// on. That operand is reused across the whole run; the other two are not reused.
struct ReuseSuffix {
    std::optional<Operand> owner;
    unsigned dims = 0;
    std::int64_t product = 1;
};
ReuseSuffix reuse_suffix(const LayerDesc& layer, const LoopOrder& order, const Trips& tr);

/// Product of the trips of the loops in `mask`.
std::int64_t trip_product(const Trips& tr, unsigned mask);

/// Fetches per distinct tile of `op`: prod(irrelevant trips) / reuse.
std::int64_t fetches_per_tile(Operand op, const LayerDesc& layer, const ReuseSuffix& r,
                              const Trips& tr);

/// Placement of partitions on the array.
struct ArrayMapping {
    int group_rows = 1;         // pow2ceil(IC_P); FlexTree block
    int groups_per_column = 1;  // rows / group_rows
    int columns = 1;
    int pes = 1;
};
ArrayMapping array_mapping(const Schedule& s, const HwConfig& hw);

struct Violation {
    std::string code;
    std::string message;
};

/// Every broken constraint, empty when the simulator accepts the schedule.
std::vector<Violation> validate(const LayerDesc& layer, const Schedule& s, const HwConfig& hw);
inline bool is_valid(const LayerDesc& layer, const Schedule& s, const HwConfig& hw) {
    return validate(layer, s, hw).empty();
}

class ScheduleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Throws ScheduleError listing all violations.
void require_valid(const LayerDesc& layer, const Schedule& s, const HwConfig& hw);

// --- factor grid ------------------------------------------------------------

/// {1,2,4,8,16} plus exact divisors of IC up to the column height, all <= IC.
std::vector<int> ic_partition_grid(int ic, int rows);
/// ceil(ceil(IC/IC_P)/t) for power-of-two t, capped.
std::vector<int> ic_block_grid(int ic, int icp, int cap);
/// Powers of two <= cap, plus the single-tile extent ceil(E/P) when it fits.
std::vector<int> block_grid(int extent, int p, int cap);
/// Powers of two <= max_p such that every partition has work for block b.
std::vector<int> partition_grid(int extent, int b, int max_p);

/// Loop-order-independent schedule fields.
struct FactorSet {
    Template tmpl = Template::VxV;
    Factors blocking;
    Factors partitioning;
};

/// Valid factor sets in canonical order.
std::vector<FactorSet> factor_sets(const LayerDesc& layer, const HwConfig& hw);

/// Representative loop orders for the given trips, by ascending rank.
std::vector<LoopOrder> distinct_orders(const Trips& tr);

struct Enumeration {
    std::vector<Schedule> schedules;
    bool truncated = false;
    /// Non-empty when no schedule maps.
    std::string reason;
};

/// Canonical order: factor sets (template, IC_P, IC_B, OC_P, OC_B, OX_P, OX_B,
/// OY_P, OY_B ascending) then loop-order rank. Truncated to `limit`.
Enumeration enumerate(const LayerDesc& layer, const HwConfig& hw, std::size_t limit);

// --- configuration descriptor ---------------------------------------------

enum class Routing { Internal, FlexTree };

struct ConfigDescriptor {
    std::uint16_t order_code = 0;
    Factors blocking;
    Factors partitioning;
    Template tmpl = Template::VxV;
    bool eltwise = false;
    Routing routing = Routing::Internal;
    int tap_level = 0;
    bool psum_spill = false;

    /// Four 32-bit registers.
    std::array<std::uint32_t, 4> pack() const;
    /// Throws DescriptorError on malformed images.
    static ConfigDescriptor unpack(const std::array<std::uint32_t, 4>& regs);

    bool operator==(const ConfigDescriptor&) const = default;
};

class DescriptorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// FlexTree tap level used by IC_P lanes (0 for IC_P == 1, 4 for 9..16).
int tap_level_for(int icp);

ConfigDescriptor to_descriptor(const Schedule& s, const LayerDesc& layer, const HwConfig& hw);
Schedule from_descriptor(const ConfigDescriptor& d);

}  // namespace flexnn
