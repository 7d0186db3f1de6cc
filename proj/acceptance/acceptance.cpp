// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <CLI11.hpp>

#include "flexnn/config_io.hpp"
#include "flexnn/cost_model.hpp"
#include "flexnn/harness.hpp"
#include "flexnn/rng.hpp"
#include "flexnn/sim.hpp"
#include "flexnn/zvc.hpp"

namespace fs = std::filesystem;
using namespace flexnn;

namespace {

// Tolerances and sweep sizes.
constexpr int kOracleLayers = 500;
constexpr int kZvcBuffers = 10000;
constexpr int kBitmapPairs = 1000;
constexpr double kMacRatioTol = 0.03;
constexpr std::int64_t kMinLawMacs = 100000;
constexpr double kPeakTops = 7.37;
constexpr double kPeakTol = 0.02;
constexpr double kDominanceSlack = 1e-9;
constexpr double kMinNetworkSpeedup = 1.5;

const HwConfig kHw{};

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, auto... xs) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, xs...);
    return buf;
}

struct Paths {
    std::string configs;
    std::string cli;
    std::string work;
};

// --- 1 and 5: oracle sweep ---------------------------------------------------

struct SweepCase {
    LayerDesc layer;
    Tensor4 ifmap, filters;
    Schedule schedule;
};

SweepCase sweep_case(Rng& rng, int i, double ws, double as) {
    SweepCase c;
    LayerDesc& l = c.layer;
    l.id = "c" + std::to_string(i);
    if (rng.coin(0.08)) {
        l = make_eltwise(l.id, static_cast<int>(rng.range(1, 16)), static_cast<int>(rng.range(1, 16)),
                         static_cast<int>(rng.range(1, 64)));
    } else {
        l.groups = rng.coin(0.2) ? static_cast<int>(rng.range(2, 4)) : 1;
        l.ic = l.groups * static_cast<int>(rng.range(1, 64 / l.groups));
        l.oc = l.groups * static_cast<int>(rng.range(1, 64 / l.groups));
        l.fx = static_cast<int>(rng.range(1, 5));
        l.fy = static_cast<int>(rng.range(1, 5));
        l.stride = static_cast<int>(rng.range(1, 2));
        l.pad_x = static_cast<int>(rng.range(0, l.fx / 2));
        l.pad_y = static_cast<int>(rng.range(0, l.fy / 2));
        l.ix = static_cast<int>(rng.range(l.fx, 16));
        l.iy = static_cast<int>(rng.range(l.fy, 16));
    }
    const std::uint64_t seed = rng.next();
    c.ifmap = gen_sparse_tensor(l.if_dims(), as, seed);
    c.filters = gen_sparse_tensor(l.fl_dims(), l.op == OpType::Eltwise ? as : ws, seed ^ 0x9e3779b97f4a7c15ULL);
    const std::vector<FactorSet> sets = factor_sets(l, kHw);
    const FactorSet& fs = sets[rng.below(sets.size())];
    c.schedule.tmpl = fs.tmpl;
    c.schedule.blocking = fs.blocking;
    c.schedule.partitioning = fs.partitioning;
    const std::vector<LoopOrder> orders = distinct_orders(trips(l, c.schedule));
    c.schedule.order = orders[rng.below(orders.size())];
    return c;
}

struct SweepResult {
    int layers = 0, runs = 0, mismatches = 0, order_violations = 0, ws0_cases = 0, ws0_violations = 0;
    std::string first_failure;
};

const SweepResult& oracle_sweep() {
    static const SweepResult result = [] {
        SweepResult r;
        const Requant rq{3, 6, false};
        Rng rng(20240601);
        for (int i = 0; i < kOracleLayers; ++i) {
            const bool ws0 = i % 10 == 0;
            const double ws = ws0 ? 0.0 : rng.unit(), as = rng.unit();
            const SweepCase c = sweep_case(rng, i, ws, as);
            const LayerDesc& l = c.layer;
            const Tensor4 want = l.op == OpType::Conv ? requantize(conv2d_ref(c.ifmap, c.filters, l), rq)
                                                      : eltwise_add_ref(c.ifmap, c.filters);
            std::array<std::int64_t, 3> cycles{};
            for (SparsityMode m : kAllModes) {
                SimOptions so;
                so.mode = m;
                so.requant = rq;
                const SimResult s = simulate_layer(l, c.schedule, c.ifmap, c.filters, kHw, so);
                ++r.runs;
                if (s.ofmap != want) {
                    ++r.mismatches;
                    if (r.first_failure.empty())
                        r.first_failure = l.id + " " + summary(c.schedule) + " mode " + mode_name(m);
                }
                cycles[static_cast<std::size_t>(m)] = s.compute_cycles;
            }
            if (!(cycles[2] <= cycles[1] && cycles[1] <= cycles[0])) ++r.order_violations;
            if (ws0 && l.op == OpType::Conv) {
                ++r.ws0_cases;
                if (cycles[1] != cycles[0]) ++r.ws0_violations;
            }
            ++r.layers;
        }
        return r;
    }();
    return result;
}

Outcome criterion1(const Paths&) {
    const SweepResult& r = oracle_sweep();
    Outcome o;
    o.pass = r.mismatches == 0 && r.layers >= kOracleLayers;
    o.detail = fmt("%d layers x 3 modes, %d ofmap mismatches", r.layers, r.mismatches);
    if (!r.first_failure.empty()) o.detail += "; first: " + r.first_failure;
    return o;
}

Outcome criterion5(const Paths&) {
    const SweepResult& r = oracle_sweep();
    Outcome o;
    o.pass = r.order_violations == 0 && r.ws0_violations == 0 && r.ws0_cases > 0;
    o.detail = fmt("%d ordering violations in %d runs; ws=0 weight-sided speedup != 1 in %d of %d layers",
                   r.order_violations, r.layers, r.ws0_violations, r.ws0_cases);
    return o;
}

// --- 2: ZVC round trip ------------------------------------------------------

Outcome criterion2(const Paths&) {
    Rng rng(77);
    int failures = 0, bad_blocks = 0;
    std::size_t bytes = 0;
    for (int i = 0; i < kZvcBuffers; ++i) {
        const auto len = static_cast<std::size_t>(rng.range(0, 4096));
        const double sparsity = rng.unit();
        std::vector<std::uint8_t> buf(len);
        for (auto& b : buf) b = rng.coin(sparsity) ? 0 : static_cast<std::uint8_t>(rng.range(1, 255));
        const zvc::Stream s = zvc::encode(std::span<const std::uint8_t>(buf), static_cast<std::uint32_t>(i));
        for (const zvc::Block& b : s.blocks) {
            std::size_t pop = 0;
            for (std::uint8_t x : b.bitmap) pop += static_cast<std::size_t>(std::popcount(x));
            if (pop != b.compressed.size()) ++bad_blocks;
        }
        const zvc::Stream back = zvc::deserialize(zvc::serialize(s));
        if (zvc::decode(s) != buf || zvc::decode(back) != buf) ++failures;
        bytes += len;
    }
    return {failures == 0 && bad_blocks == 0,
            fmt("%d buffers (%zu bytes), %d round-trip failures, %d blocks with popcount != payload", kZvcBuffers,
                bytes, failures, bad_blocks)};
}

// --- 3: combined-sparsity pair generation -----------------------------------

Outcome criterion3(const Paths&) {
    Rng rng(31);
    int failures = 0;
    std::size_t pairs = 0;
    for (int i = 0; i < kBitmapPairs; ++i) {
        const int len = static_cast<int>(rng.range(1, kSubbankLen));
        const auto mask = static_cast<std::uint16_t>((1u << len) - 1u);
        const Bitmap a{static_cast<std::uint16_t>(rng.next() & mask), len};
        const Bitmap b{static_cast<std::uint16_t>(rng.next() & mask), len};
        std::vector<std::pair<int, int>> want;
        int ra = 0, rb = 0;
        for (int p = 0; p < len; ++p) {
            const bool x = (a.bits >> p) & 1u, y = (b.bits >> p) & 1u;
            if (x && y) want.emplace_back(ra, rb);
            ra += x;
            rb += y;
        }
        const Bitmap csb = combine_bitmaps(a, b);
        const auto got = cag_pairs(csb, a, b);
        if (got != want || csb.popcount() != static_cast<int>(want.size())) ++failures;
        pairs += want.size();
    }
    return {failures == 0, fmt("%d bitmap pairs (%zu nonzero pairs), %d mismatches vs brute force", kBitmapPairs,
                               pairs, failures)};
}

// --- 4: ideal-speedup law ---------------------------------------------------

// MACs whose IF operand lies inside the unpadded ifmap.
std::int64_t in_bounds_macs(const LayerDesc& l) {
    const auto taps = [](int out, int in, int f, int stride, int pad) {
        std::int64_t n = 0;
        for (int o = 0; o < out; ++o)
            for (int k = 0; k < f; ++k) {
                const int i = o * stride + k - pad;
                n += i >= 0 && i < in;
            }
        return n;
    };
    return taps(l.ox(), l.ix, l.fx, l.stride, l.pad_x) * taps(l.oy(), l.iy, l.fy, l.stride, l.pad_y) *
           l.ic_per_group() * l.oc;
}

Outcome criterion4(const Paths&) {
    const std::vector<LayerDesc> layers = {make_conv("3x3", 16, 16, 64, 3, 3, 64, 1, 1),
                                           make_conv("1x1", 28, 28, 128, 1, 1, 64),
                                           make_conv("5x5s2", 24, 24, 32, 5, 5, 48, 2, 2)};
    const std::array<std::pair<double, double>, 3> points = {{{0.25, 0.25}, {0.5, 0.5}, {0.61, 0.55}}};
    Outcome o;
    double worst_ratio = 0, max_over_ideal = 0;
    int runs = 0;
    for (const LayerDesc& l : layers) {
        if (l.dense_macs() < kMinLawMacs) continue;
        for (const auto& [ws, as] : points) {
            const Tensor4 in = gen_sparse_tensor(l.if_dims(), as, 5), fl = gen_sparse_tensor(l.fl_dims(), ws, 6);
            const double ideal = 1.0 / ((1 - ws) * (1 - as));
            for (const Schedule& s : {find_optimal(l, kHw, Objective::Energy).schedule,
                                      find_optimal(l, kHw, Objective::Cycles, {SparsityMode::TwoSided, ws, as}).schedule}) {
                SimOptions so;
                so.mode = SparsityMode::TwoSided;
                so.functional = false;
                const SimResult r = simulate_layer(l, s, in, fl, kHw, so);
                const double ratio = double(r.macs_executed) / double(in_bounds_macs(l));
                const double err = std::abs(ratio / ((1 - ws) * (1 - as)) - 1);
                const double speedup = double(r.dense_cycles) / double(r.compute_cycles);
                worst_ratio = std::max(worst_ratio, err);
                max_over_ideal = std::max(max_over_ideal, speedup / ideal);
                if (err > kMacRatioTol || speedup > ideal) {
                    o.pass = false;
                    o.detail += fmt("[%s ws=%.2f as=%.2f: mac ratio err %.4f, speedup %.3f vs ideal %.3f] ",
                                    l.id.c_str(), ws, as, err, speedup, ideal);
                }
                ++runs;
            }
        }
    }
    o.detail += fmt("%d runs; worst mac-ratio error %.2f%% (limit %.0f%%); max speedup/ideal %.3f", runs,
                    100 * worst_ratio, 100 * kMacRatioTol, max_over_ideal);
    return o;
}

// --- 6: FlexTree ------------------------------------------------------------

Outcome criterion6(const Paths&) {
    Rng rng(66);
    int failures = 0;
    std::string taps;
    const std::array<int, 5> pow2 = {1, 2, 4, 8, 16};
    for (int icp : {1, 2, 4, 8, 12, 16}) {
        for (int trial = 0; trial < 200; ++trial) {
            int width = 1;
            while (width < icp) width *= 2;
            // Lanes past ic_p within a group are fed zeros by the array.
            std::vector<std::int32_t> lanes(kFlexTreeLanes);
            for (int k = 0; k < kFlexTreeLanes; ++k)
                lanes[static_cast<std::size_t>(k)] =
                    k % width < icp ? static_cast<std::int32_t>(rng.range(-(1 << 20), 1 << 20)) : 0;
            const FlexTreeResult serial = flextree_accumulate(lanes, 1);
            const FlexTreeResult grouped = flextree_accumulate(lanes, icp);
            std::vector<std::int32_t> want;
            for (int g = 0; g < kFlexTreeLanes; g += width) {
                std::int32_t acc = 0;
                for (int k = g; k < g + width; ++k) acc += serial.outputs[static_cast<std::size_t>(k)];
                want.push_back(acc);
            }
            if (grouped.outputs != want) ++failures;
        }
    }
    std::vector<int> got;
    for (int icp : pow2) got.push_back(flextree_accumulate(std::vector<std::int32_t>(kFlexTreeLanes, 1), icp).taps_per_round);
    const std::vector<int> want_taps = {8, 8, 4, 2, 1};
    for (int t : got) taps += std::to_string(t) + ",";
    taps.pop_back();
    return {failures == 0 && got == want_taps,
            fmt("%d grouped-sum mismatches over 1200 trials; taps per round {%s}", failures, taps.c_str())};
}

// --- 7: peak throughput -----------------------------------------------------

Outcome criterion7(const Paths&) {
    const LayerDesc l = make_conv("peak", 10, 10, 1024, 3, 3, 64, 1, 1);
    const Schedule s = find_optimal(l, kHw, Objective::Cycles).schedule;
    SimOptions so;
    so.mode = SparsityMode::Dense;
    so.functional = false;
    const SimResult r = simulate_layer(l, s, gen_sparse_tensor(l.if_dims(), 0, 1), gen_sparse_tensor(l.fl_dims(), 0, 2),
                                       kHw, so);
    const double tops = 2.0 * double(l.dense_macs()) * kHw.freq_ghz * 1e9 / double(r.total_cycles) / 1e12;
    const double err = std::abs(tops / kPeakTops - 1);
    return {err <= kPeakTol, fmt("%.4f TOPS (%.2f%% from %.2f, limit %.0f%%); %lld MACs in %lld cycles, %s", tops,
                                 100 * err, kPeakTops, 100 * kPeakTol, static_cast<long long>(l.dense_macs()),
                                 static_cast<long long>(r.total_cycles), summary(s).c_str())};
}

// --- 8: flexibility dominance -----------------------------------------------

Outcome criterion8(const Paths& p) {
    const std::vector<BaselineSpec> specs = {eyeriss_spec(), tpu_spec()};
    Outcome o;
    int layers = 0, violations = 0, tpu_negative = 0;
    std::string report;
    for (const char* name : {"resnet101", "yolov2"}) {
        const NetworkConfig net = load_network(p.configs + "/" + name + "_shapes.json");
        std::array<std::vector<double>, 2> equal, own;
        for (const LayerDesc& l : net.layers) {
            const Comparison ce = compare_analytic(l, specs, kHw, true);
            const Comparison co = compare_analytic(l, specs, kHw, false);
            for (std::size_t b = 0; b < 2; ++b) {
                equal[b].push_back(ce.rows[b].reduction);
                own[b].push_back(co.rows[b].reduction);
                if (ce.rows[b].reduction < -kDominanceSlack) {
                    ++violations;
                    o.detail += fmt("[%s/%s vs %s: %.4f] ", name, l.id.c_str(), specs[b].name.c_str(),
                                    ce.rows[b].reduction);
                }
            }
            if (co.rows[1].reduction < 0) ++tpu_negative;
            ++layers;
        }
        for (std::size_t b = 0; b < 2; ++b) {
            const auto mean = [](const std::vector<double>& v) {
                double s = 0;
                for (double x : v) s += x;
                return 100 * s / double(v.size());
            };
            const auto [lo, hi] = std::minmax_element(own[b].begin(), own[b].end());
            report += fmt("%s vs %s: equal ratios mean %.1f%%, own ratios mean %.1f%% [%.1f%%, %.1f%%]; ", name,
                          specs[b].name.c_str(), mean(equal[b]), mean(own[b]), 100 * *lo, 100 * *hi);
        }
    }
    o.pass = violations == 0 && tpu_negative > 0;
    o.detail += fmt("%d layers, %d dominance violations, %d layers with negative reduction vs TPU at its own ratios; ",
                    layers, violations, tpu_negative) +
                report;
    return o;
}

// --- 9: network trends ------------------------------------------------------

Outcome criterion9(const Paths& p) {
    struct Net {
        const char* name;
        double ws, as;
    };
    const Net nets[] = {{"resnet50", 0.61, 0.55}, {"mobilenetv2", 0.52, 0.30}, {"googlenet", 0.24, 0.58},
                        {"inceptionv3", 0.61, 0.63}};
    Outcome o;
    std::vector<double> two, weight;
    for (const Net& n : nets) {
        NetworkConfig net = load_network(p.configs + "/" + n.name + "_shapes.json");
        apply_sparsity(net, n.ws, n.as);
        RunOptions opt;
        opt.objective = Objective::Cycles;
        opt.seed = 1;
        const RunReport r = run_network(net, kHw, opt);
        const double ideal = 1.0 / ((1 - n.ws) * (1 - n.as));
        const NetworkSummary& s = r.summary;
        const bool ok = s.failed == 0 && s.speedup_two >= kMinNetworkSpeedup && s.speedup_two <= ideal &&
                        s.speedup_two > s.speedup_weight;
        o.pass = o.pass && ok;
        two.push_back(s.speedup_two);
        weight.push_back(s.speedup_weight);
        o.detail += fmt("%s %s: two-sided %.3fx, weight-sided %.3fx, ideal %.2fx; ", ok ? "ok" : "MISS", n.name,
                        s.speedup_two, s.speedup_weight, ideal);
        std::fflush(stdout);
    }
    o.detail += fmt("geomean two-sided %.3fx, weight-sided %.3fx (floor %.1fx)", geomean(two), geomean(weight),
                    kMinNetworkSpeedup);
    return o;
}

// --- 10: CLI determinism ----------------------------------------------------

std::string slurp(const fs::path& f) {
    std::ifstream is(f, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Outcome criterion10(const Paths& p) {
    if (p.cli.empty()) return {false, "no --cli given"};
    const fs::path root = fs::path(p.work) / "determinism";
    fs::remove_all(root);
    std::vector<std::string> csv;
    for (const char* run : {"a", "b"}) {
        const fs::path out = root / run;
        const std::string cmd = "\"" + p.cli + "\" simulate --net \"" + p.configs +
                                "/mobilenetv2_shapes.json\" --ws-from-config --seed 1 --limit 8 --baselines tpu "
                                "--out \"" + out.string() + "\" > \"" + (root / run).string() + ".log\" 2>&1";
        fs::create_directories(root);
        if (std::system(cmd.c_str()) != 0) return {false, std::string("CLI run failed: ") + cmd};
        csv.push_back(slurp(out / "report.csv"));
    }
    const bool same = csv[0] == csv[1] && !csv[0].empty();
    return {same, fmt("two runs of `simulate --seed 1`: report.csv %zu bytes, %s", csv[0].size(),
                      same ? "byte-identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria 1-10"};
    Paths paths;
    std::vector<int> only;
    paths.configs = FLEXNN_CONFIG_DIR;
    paths.work = (fs::temp_directory_path() / "flexnn_acceptance").string();
    app.add_option("--only", only, "criteria to run (default all)")->check(CLI::Range(1, 10))->delimiter(',');
    app.add_option("--cli", paths.cli, "flexnn executable for criterion 10");
    app.add_option("--configs", paths.configs, "directory with the bundled network files")->capture_default_str();
    app.add_option("--work", paths.work, "scratch directory")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<const char*, std::function<Outcome(const Paths&)>>> criteria = {
        {"oracle equivalence", criterion1}, {"ZVC round trip", criterion2},
        {"combined-sparsity pairs", criterion3}, {"ideal-speedup law", criterion4},
        {"mode ordering", criterion5}, {"FlexTree grouping", criterion6},
        {"peak throughput", criterion7}, {"flexibility dominance", criterion8},
        {"network trends", criterion9}, {"determinism", criterion10}};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i + 1);
        if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second(paths);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2d %s  %s (%.1fs): %s\n", n, o.pass ? "PASS" : "FAIL", criteria[i].first, secs,
                    o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed ? 1 : 0;
}
