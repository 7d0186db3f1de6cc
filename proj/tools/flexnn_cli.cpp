// flexnn: schedule search, simulation, baseline comparison and report rendering
// for network shape files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "flexnn/config_io.hpp"
#include "flexnn/harness.hpp"

namespace fs = std::filesystem;
using namespace flexnn;

namespace {

struct Args {
    std::string net, sparsity, hw, mode = "two", objective = "energy", out = "out", schedule;
    std::vector<std::string> baselines;
    bool ws_from_config = false, equal_ratios = false, strict = false, chain = false, trace = false;
    bool analytic = false, markdown = false;
    std::optional<double> ws, as;
    std::uint64_t seed = 1;
    std::size_t limit = 0;
    std::string in;
};

void add_run_flags(CLI::App* c, Args& a) {
    c->add_option("--net", a.net, "network shape file (JSON)")->required()->check(CLI::ExistingFile);
    auto* sp = c->add_option("--sparsity", a.sparsity, "sparsity statistics file (JSON)")->check(CLI::ExistingFile);
    auto* fc = c->add_flag("--ws-from-config", a.ws_from_config,
                           "use the sparsity file next to --net (<name>_sparsity.json), else the per-layer ws/as");
    auto* ws = c->add_option("--ws", a.ws, "weight sparsity for every layer")->check(CLI::Range(0.0, 1.0));
    auto* as = c->add_option("--as", a.as, "activation sparsity for every layer")->check(CLI::Range(0.0, 1.0));
    ws->needs(as);
    as->needs(ws);
    sp->excludes(fc)->excludes(ws);
    fc->excludes(ws);
    c->add_option("--hw", a.hw, "hardware and baseline overrides (JSON)")->check(CLI::ExistingFile);
    c->add_option("--mode", a.mode, "mode for baselines and traces")
        ->check(CLI::IsMember({"dense", "weight", "two"}))
        ->capture_default_str();
    c->add_option("--objective", a.objective, "search objective")
        ->check(CLI::IsMember({"energy", "cycles", "edp"}))
        ->capture_default_str();
    c->add_option("--seed", a.seed, "tensor synthesis seed")->capture_default_str();
    c->add_option("--out", a.out, "output directory")->capture_default_str();
    c->add_option("--schedule", a.schedule, "schedule override file (JSON)")->check(CLI::ExistingFile);
    c->add_option("--limit", a.limit, "run only the first N layers");
    c->add_flag("--strict", a.strict, "abort on the first unmappable layer");
    c->add_flag("--chain", a.chain, "feed each layer's output into the next");
}

NetworkConfig load_inputs(const Args& a) {
    NetworkConfig net = load_network(a.net);
    if (net.name.empty()) net.name = fs::path(a.net).stem().string();
    if (!a.sparsity.empty()) {
        apply_sparsity(net, load_sparsity(a.sparsity));
    } else if (a.ws) {
        apply_sparsity(net, *a.ws, *a.as);
    } else if (a.ws_from_config) {
        std::string stem = fs::path(a.net).stem().string();
        if (const auto cut = stem.rfind("_shapes"); cut != std::string::npos) stem.erase(cut);
        const fs::path paired = fs::path(a.net).parent_path() / (stem + "_sparsity.json");
        if (fs::exists(paired)) apply_sparsity(net, load_sparsity(paired.string()));
    }
    return net;
}

void print_summary(const RunReport& r, const std::string& dir) {
    const NetworkSummary& s = r.summary;
    std::printf("%s: %zu layers (%zu unmapped), speedup over dense %.3fx weight-sided, %.3fx two-sided\n",
                s.name.c_str(), s.layers, s.failed, s.speedup_weight, s.speedup_two);
    for (const LayerRow& row : r.rows)
        if (!row.error.empty()) std::printf("  unmapped %s: %s\n", row.id.c_str(), row.error.c_str());
    if (!r.baselines.empty()) {
        for (std::size_t b = 0; b < r.baselines.size(); ++b) {
            std::vector<double> red;
            for (const LayerRow& row : r.rows)
                if (b < row.reductions.size()) red.push_back(row.reductions[b].second);
            double lo = 1, hi = -1, sum = 0;
            for (double x : red) lo = std::min(lo, x), hi = std::max(hi, x), sum += x;
            if (!red.empty())
                std::printf("  vs %s: energy reduction mean %.1f%%, min %.1f%%, max %.1f%%\n",
                            r.baselines[b].c_str(), 100 * sum / double(red.size()), 100 * lo, 100 * hi);
        }
    }
    std::printf("wrote %s\n", (fs::path(dir) / "report.csv").string().c_str());
}

int run(const Args& a, bool simulate, bool need_baselines) {
    const NetworkConfig net = load_inputs(a);
    const HwConfig hw = a.hw.empty() ? HwConfig{} : load_hw(a.hw);
    RunOptions o;
    o.objective = objective_from_string(a.objective);
    o.mode = mode_from_string(a.mode);
    std::vector<std::string> names = a.baselines;
    if (need_baselines && names.empty()) names = {"eyeriss", "tpu"};
    o.baselines = load_baselines(a.hw, names);
    o.equal_ratios = a.equal_ratios;
    o.seed = a.seed;
    o.strict = a.strict;
    o.chain = a.chain;
    o.simulate = simulate;
    o.limit = a.limit;
    if (!a.schedule.empty()) o.schedules = load_schedules(a.schedule);
    fs::create_directories(a.out);
    if (a.trace && simulate) {
        o.trace_dir = (fs::path(a.out) / "traces").string();
        fs::create_directories(o.trace_dir);
    }
    const RunReport r = run_network(net, hw, o);
    write_report(a.out, r);
    print_summary(r, a.out);
    return 0;
}

int report(const Args& a) {
    std::ifstream is(a.in, std::ios::binary);
    if (!is) throw ConfigError(a.in + ": cannot open file");
    const std::vector<LayerRow> rows = read_csv(is);
    const std::string name = fs::path(a.in).parent_path().filename().string();
    if (a.markdown) {
        write_markdown(std::cout, name, rows);
        return 0;
    }
    const NetworkSummary s = aggregate(name, rows);
    std::printf("%zu layers (%zu unmapped)\n", s.layers, s.failed);
    const char* modes[3] = {"dense", "weight", "two"};
    for (std::size_t m = 0; m < 3; ++m)
        std::printf("  %-6s cycles %lld  energy %.6g\n", modes[m], static_cast<long long>(s.cycles[m]), s.energy[m]);
    std::printf("speedup over dense %.3fx weight-sided, %.3fx two-sided\n", s.speedup_weight, s.speedup_two);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FlexNN dataflow accelerator simulator"};
    app.require_subcommand(1);
    Args a;

    auto* search = app.add_subcommand("search", "optimal schedules and analytic costs, no simulation");
    add_run_flags(search, a);
    search->add_option("--baselines", a.baselines, "baseline dataflows (eyeriss, tpu)")->delimiter(',');
    search->add_flag("--equal-ratios", a.equal_ratios, "evaluate baselines with FlexNN's energy ratios");

    auto* simulate = app.add_subcommand("simulate", "search, then simulate every layer in all three modes");
    add_run_flags(simulate, a);
    simulate->add_option("--baselines", a.baselines, "baseline dataflows (eyeriss, tpu)")->delimiter(',');
    simulate->add_flag("--equal-ratios", a.equal_ratios, "evaluate baselines with FlexNN's energy ratios");
    simulate->add_flag("--trace", a.trace, "per-round lane occupancy CSV per layer under OUT/traces");

    auto* compare = app.add_subcommand("compare", "energy reduction against fixed-dataflow baselines");
    add_run_flags(compare, a);
    compare->add_option("--baselines", a.baselines, "baseline dataflows (default eyeriss,tpu)")->delimiter(',');
    compare->add_flag("--equal-ratios", a.equal_ratios, "evaluate baselines with FlexNN's energy ratios");
    compare->add_flag("--analytic", a.analytic, "dense access-count model instead of simulation");
    compare->add_flag("--trace", a.trace, "per-round lane occupancy CSV per layer under OUT/traces");

    auto* rep = app.add_subcommand("report", "summarize a report.csv");
    rep->add_option("--in", a.in, "report.csv written by search/simulate/compare")->required();
    rep->add_flag("--markdown", a.markdown, "print the per-layer table as markdown");

    CLI11_PARSE(app, argc, argv);
    try {
        if (search->parsed()) return run(a, false, false);
        if (simulate->parsed()) return run(a, true, false);
        if (compare->parsed()) return run(a, !a.analytic, true);
        return report(a);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
