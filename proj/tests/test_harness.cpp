#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "flexnn/config_io.hpp"
#include "flexnn/harness.hpp"
#include "flexnn/rng.hpp"

using namespace flexnn;
namespace fs = std::filesystem;

namespace {

const std::string kConfigs = FLEXNN_CONFIG_DIR;

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("flexnn_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string config_error(const Json& j) {
    try {
        parse_network(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

LayerDesc random_layer(Rng& rng, int i) {
    LayerDesc l;
    if (rng.coin(0.15)) {
        l = make_eltwise("", static_cast<int>(rng.range(1, 40)), static_cast<int>(rng.range(1, 40)),
                         static_cast<int>(rng.range(1, 300)));
    } else {
        l.groups = rng.coin(0.2) ? static_cast<int>(rng.range(1, 8)) : 1;
        l.ic = l.groups * static_cast<int>(rng.range(1, 64));
        l.oc = l.groups * static_cast<int>(rng.range(1, 64));
        l.fx = static_cast<int>(rng.range(1, 7));
        l.fy = static_cast<int>(rng.range(1, 7));
        l.pad_x = static_cast<int>(rng.range(0, 3));
        l.pad_y = rng.coin(0.5) ? l.pad_x : static_cast<int>(rng.range(0, 3));
        l.stride = static_cast<int>(rng.range(1, 3));
        l.ix = static_cast<int>(rng.range(l.fx, 80));
        l.iy = static_cast<int>(rng.range(l.fy, 80));
    }
    l.id = "l" + std::to_string(i) + (rng.coin(0.3) ? ",\"odd\"" : "");
    l.weight_sparsity = rng.coin(0.3) ? 0.0 : rng.unit();
    l.act_sparsity = rng.coin(0.3) ? 0.0 : rng.unit();
    return l;
}

LayerRow row_with(const std::string& id, std::int64_t dense, std::int64_t weight, std::int64_t two) {
    LayerRow r;
    r.id = id;
    r.modes[0].compute_cycles = dense;
    r.modes[1].compute_cycles = weight;
    r.modes[2].compute_cycles = two;
    for (std::size_t m = 0; m < 3; ++m) r.modes[m].energy = 10.0 * double(m + 1);
    return r;
}

NetworkConfig tiny_net() {
    NetworkConfig n;
    n.name = "tiny";
    n.layers = {make_conv("c1", 10, 10, 8, 3, 3, 16, 1, 1), make_conv("c2", 10, 10, 16, 1, 1, 8),
                make_eltwise("add", 10, 10, 8)};
    apply_sparsity(n, 0.5, 0.4);
    return n;
}

}  // namespace

// --- configuration files ----------------------------------------------------

TEST(Config, Resnet50FirstConv) {
    const NetworkConfig n = load_network(kConfigs + "/resnet50_shapes.json");
    ASSERT_FALSE(n.layers.empty());
    const LayerDesc& l = n.layers.front();
    EXPECT_EQ(l.op, OpType::Conv);
    EXPECT_EQ(l.ix, 224);
    EXPECT_EQ(l.iy, 224);
    EXPECT_EQ(l.ic, 3);
}

TEST(Config, BundledNetworksLoad) {
    for (const char* name : {"resnet50", "resnet101", "mobilenetv2", "googlenet", "inceptionv3", "yolov2"}) {
        const NetworkConfig n = load_network(kConfigs + "/" + name + "_shapes.json");
        EXPECT_EQ(n.name, name);
        EXPECT_GT(n.layers.size(), 10u) << name;
    }
    for (const char* name : {"resnet50", "mobilenetv2", "googlenet", "inceptionv3"})
        EXPECT_NO_THROW(load_sparsity(kConfigs + "/" + std::string(name) + "_sparsity.json")) << name;
}

TEST(Config, EmptyNetworkRejected) {
    EXPECT_NE(config_error(Json::parse(R"({"name": "x", "layers": []})")).find("no layers"), std::string::npos);
}

TEST(Config, SparsityOutOfRange) {
    const Json bad = Json::parse(R"({"ws": 1.2, "as": 0.5})");
    try {
        parse_sparsity(bad);
        FAIL() << "ws=1.2 accepted";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("ws"), std::string::npos) << e.what();
    }
    const Json bad_layer = Json::parse(R"({"ws": 0.5, "as": 0.5, "layers": [{"id": "a", "ws": 0.1, "as": -0.1}]})");
    try {
        parse_sparsity(bad_layer);
        FAIL() << "as=-0.1 accepted";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("layers[0].as"), std::string::npos) << e.what();
    }
}

TEST(Config, FieldPathDiagnostics) {
    const std::string base = R"({"name": "n", "layers": [
        {"id": "a", "ix": 8, "iy": 8, "ic": 4, "fx": 3, "fy": 3, "oc": 4}, )";
    EXPECT_NE(config_error(Json::parse(base + R"({"id": "b", "ix": 8, "iy": 8, "ic": 4, "fx": 0, "fy": 3, "oc": 4}]})"))
                  .find("layers[1].fx"),
              std::string::npos);
    EXPECT_NE(config_error(Json::parse(base + R"({"id": "b", "ix": 8, "iy": 8, "ic": 4, "fx": 3, "fy": 3, "oc": 4,
                                                  "kernel": 3}]})"))
                  .find("layers[1].kernel"),
              std::string::npos);
    EXPECT_NE(config_error(Json::parse(base + R"({"id": "b", "ix": "8", "iy": 8, "ic": 4, "fx": 3, "fy": 3, "oc": 4}]})"))
                  .find("layers[1].ix"),
              std::string::npos);
    EXPECT_NE(config_error(Json::parse(base + R"({"id": "a", "ix": 8, "iy": 8, "ic": 4, "fx": 3, "fy": 3, "oc": 4}]})"))
                  .find("duplicate"),
              std::string::npos);
    EXPECT_NE(config_error(Json::parse(R"({"layers": [{"id": "a", "op": "eltwise", "ix": 8, "iy": 8, "ic": 4}], "extra": 1})"))
                  .find("network.extra"),
              std::string::npos);
}

TEST(Config, SyntaxErrorReportsLine) {
    const fs::path dir = scratch_dir("syntax");
    const fs::path file = dir / "bad.json";
    std::ofstream(file) << "{\n  \"name\": \"x\",\n  \"layers\": [,]\n}\n";
    try {
        load_network(file.string());
        FAIL() << "malformed JSON accepted";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(file.string() + ":3:"), std::string::npos) << e.what();
    }
    EXPECT_THROW(load_network((dir / "missing.json").string()), ConfigError);
}

TEST(Config, NetworkRoundTripProperty) {
    const fs::path dir = scratch_dir("roundtrip");
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        NetworkConfig n;
        n.name = "net" + std::to_string(trial);
        const int count = static_cast<int>(rng.range(1, 12));
        for (int i = 0; i < count; ++i) n.layers.push_back(random_layer(rng, i));
        if (rng.coin(0.3)) {
            const LayerDesc& l = n.layers.front();
            if (l.op == OpType::Conv) {
                const Enumeration e = enumerate(l, HwConfig{}, 50);
                if (!e.schedules.empty())
                    n.schedules[l.id] = e.schedules[rng.below(e.schedules.size())];
            }
        }
        EXPECT_EQ(parse_network(network_to_json(n)), n);
        const std::string path = (dir / "n.json").string();
        save_network(path, n);
        ASSERT_EQ(load_network(path), n) << "trial " << trial;
    }
}

TEST(Config, SparsityRoundTripProperty) {
    const fs::path dir = scratch_dir("sparsity");
    Rng rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        SparsityStats s;
        s.network_weight_sparsity = rng.unit();
        s.network_act_sparsity = rng.unit();
        for (int i = 0, n = static_cast<int>(rng.range(0, 6)); i < n; ++i)
            s.layers.push_back({"l" + std::to_string(i), rng.unit(), rng.coin(0.1) ? 1.0 : rng.unit()});
        const std::string path = (dir / "s.json").string();
        save_sparsity(path, s);
        const SparsityStats back = load_sparsity(path);
        ASSERT_EQ(back.layers.size(), s.layers.size());
        EXPECT_EQ(back.network_weight_sparsity, s.network_weight_sparsity);
        EXPECT_EQ(back.network_act_sparsity, s.network_act_sparsity);
        for (std::size_t i = 0; i < s.layers.size(); ++i) {
            EXPECT_EQ(back.layers[i].id, s.layers[i].id);
            EXPECT_EQ(back.layers[i].weight_sparsity, s.layers[i].weight_sparsity);
            EXPECT_EQ(back.layers[i].act_sparsity, s.layers[i].act_sparsity);
        }
    }
}

TEST(Config, HwAndScheduleRoundTrip) {
    HwConfig hw;
    hw.rows = 8;
    hw.sram_ports = 8;
    hw.freq_ghz = 1.0;
    EXPECT_EQ(parse_hw(hw_to_json(hw)), hw);
    EXPECT_EQ(parse_hw(Json::object()), HwConfig{});
    EXPECT_THROW(parse_hw(Json::parse(R"({"rows": 0})")), ConfigError);

    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const LayerDesc l = make_conv("c", static_cast<int>(rng.range(3, 30)), static_cast<int>(rng.range(3, 30)),
                                      static_cast<int>(rng.range(1, 100)), 3, 3, static_cast<int>(rng.range(1, 100)),
                                      1, 1);
        const Enumeration e = enumerate(l, HwConfig{}, 2000);
        ASSERT_FALSE(e.schedules.empty());
        const Schedule& s = e.schedules[rng.below(e.schedules.size())];
        EXPECT_EQ(parse_schedule(schedule_to_json(s)), s);
    }
}

TEST(Config, BaselineOverrides) {
    const fs::path dir = scratch_dir("baselines");
    const fs::path file = dir / "hw.json";
    std::ofstream(file) << R"({"baselines": {"tpu": {"ratios": {"rf": 0.5}, "pe_count": 128}}})";
    const std::vector<BaselineSpec> b = load_baselines(file.string(), {"eyeriss", "tpu"});
    ASSERT_EQ(b.size(), 2u);
    EXPECT_EQ(b[0].pe_count, eyeriss_spec().pe_count);
    EXPECT_EQ(b[1].ratios.rf, 0.5);
    EXPECT_EQ(b[1].ratios.dram, tpu_spec().ratios.dram);
    EXPECT_EQ(b[1].pe_count, 128);
    EXPECT_THROW(load_baselines("", {"simba"}), std::exception);
}

// --- aggregation ---------------------------------------------------------------

TEST(Aggregate, SingleRowEqualsRow) {
    const LayerRow r = row_with("a", 900, 600, 300);
    const NetworkSummary s = aggregate("n", {r});
    EXPECT_EQ(s.layers, 1u);
    EXPECT_EQ(s.cycles[0], 900);
    EXPECT_DOUBLE_EQ(s.speedup_weight, r.speedup(SparsityMode::WeightSided));
    EXPECT_DOUBLE_EQ(s.speedup_two, r.speedup(SparsityMode::TwoSided));
    EXPECT_DOUBLE_EQ(s.energy[2], 30.0);
}

TEST(Aggregate, CycleWeighted) {
    // 2x on 100 dense cycles and 8x on 800: (100 + 800) / (50 + 100) = 6.
    const NetworkSummary s = aggregate("n", {row_with("a", 100, 100, 50), row_with("b", 800, 800, 100)});
    EXPECT_DOUBLE_EQ(s.speedup_two, 6.0);
    EXPECT_DOUBLE_EQ(s.speedup_weight, 1.0);
    // Equal dense cycles: (400 + 400) / (200 + 50) = 3.2, still not the mean 5.
    EXPECT_DOUBLE_EQ(aggregate("n", {row_with("a", 400, 400, 200), row_with("b", 400, 400, 50)}).speedup_two, 3.2);
}

TEST(Aggregate, IdenticalCyclesGiveOne) {
    const NetworkSummary s = aggregate("n", {row_with("a", 70, 70, 70), row_with("b", 5, 5, 5)});
    EXPECT_EQ(s.speedup_weight, 1.0);
    EXPECT_EQ(s.speedup_two, 1.0);
}

TEST(Aggregate, FailedRowsExcluded) {
    LayerRow bad = row_with("x", 0, 0, 0);
    bad.error = "no schedule";
    const NetworkSummary s = aggregate("n", {row_with("a", 100, 100, 50), bad});
    EXPECT_EQ(s.failed, 1u);
    EXPECT_DOUBLE_EQ(s.speedup_two, 2.0);
}

TEST(Aggregate, Errors) {
    EXPECT_THROW(aggregate("n", {}), std::invalid_argument);
    EXPECT_THROW(geomean({}), std::invalid_argument);
    EXPECT_THROW(geomean({1.0, 0.0}), std::invalid_argument);
    EXPECT_DOUBLE_EQ(geomean({2.0, 8.0}), 4.0);
    EXPECT_NEAR(geomean({3.11, 1.81, 2.63, 3.3}), 2.6438, 1e-4);
}

// --- network runs -----------------------------------------------------------

TEST(Harness, RowsFollowNetworkOrder) {
    const NetworkConfig n = tiny_net();
    const RunReport r = run_network(n, HwConfig{}, RunOptions{});
    ASSERT_EQ(r.rows.size(), n.layers.size());
    for (std::size_t i = 0; i < n.layers.size(); ++i) {
        const LayerRow& row = r.rows[i];
        EXPECT_EQ(row.id, n.layers[i].id);
        EXPECT_TRUE(row.error.empty());
        EXPECT_EQ(row.at(SparsityMode::Dense).macs_executed, n.layers[i].dense_macs());
        EXPECT_LE(row.at(SparsityMode::TwoSided).macs_executed, row.at(SparsityMode::WeightSided).macs_executed);
    }
    RunOptions lim;
    lim.limit = 2;
    EXPECT_EQ(run_network(n, HwConfig{}, lim).rows.size(), 2u);
}

TEST(Harness, DeterministicCsv) {
    const NetworkConfig n = tiny_net();
    RunOptions o;
    o.seed = 7;
    o.baselines = {eyeriss_spec(), tpu_spec()};
    std::ostringstream a, b;
    write_csv(a, run_network(n, HwConfig{}, o));
    write_csv(b, run_network(n, HwConfig{}, o));
    EXPECT_EQ(a.str(), b.str());
    o.seed = 8;
    std::ostringstream c;
    write_csv(c, run_network(n, HwConfig{}, o));
    EXPECT_NE(a.str(), c.str());
}

TEST(Harness, AggregatesRecomputableFromCsv) {
    RunOptions o;
    o.baselines = {tpu_spec()};
    const RunReport r = run_network(tiny_net(), HwConfig{}, o);
    std::stringstream ss;
    write_csv(ss, r);
    EXPECT_NE(ss.str().find("\r\n"), std::string::npos);
    const std::vector<LayerRow> rows = read_csv(ss);
    ASSERT_EQ(rows.size(), r.rows.size());
    EXPECT_EQ(rows[0].id, r.rows[0].id);
    EXPECT_EQ(rows[1].reductions, r.rows[1].reductions);
    const NetworkSummary s = aggregate(r.network, rows);
    EXPECT_EQ(s.cycles, r.summary.cycles);
    EXPECT_EQ(s.speedup_two, r.summary.speedup_two);
    EXPECT_EQ(s.speedup_weight, r.summary.speedup_weight);
    EXPECT_EQ(s.energy, r.summary.energy);
}

TEST(Harness, CsvQuotesAwkwardIds) {
    NetworkConfig n;
    n.name = "q";
    n.layers = {make_conv("a,\"b\"", 4, 4, 2, 1, 1, 2)};
    const RunReport r = run_network(n, HwConfig{}, RunOptions{});
    std::stringstream ss;
    write_csv(ss, r);
    EXPECT_NE(ss.str().find("\"a,\"\"b\"\"\""), std::string::npos);
    EXPECT_EQ(read_csv(ss).at(0).id, "a,\"b\"");
}

TEST(Harness, ZeroReductionWhenBaselineIsOptimal) {
    NetworkConfig n;
    n.name = "one";
    n.layers = {make_conv("only", 1, 1, 1, 1, 1, 1)};
    RunOptions o;
    o.baselines = {eyeriss_spec(), tpu_spec()};
    o.equal_ratios = true;
    o.mode = SparsityMode::Dense;
    const RunReport r = run_network(n, HwConfig{}, o);
    ASSERT_EQ(r.rows.size(), 1u);
    ASSERT_EQ(r.rows[0].reductions.size(), 2u);
    EXPECT_EQ(r.rows[0].reductions[0].second, 0.0);
    EXPECT_EQ(r.rows[0].reductions[1].second, 0.0);
}

TEST(Harness, SearchOnlyMatchesAnalytic) {
    RunOptions o;
    o.simulate = false;
    o.objective = Objective::Cycles;
    const NetworkConfig n = tiny_net();
    const RunReport r = run_network(n, HwConfig{}, o);
    for (std::size_t i = 0; i < n.layers.size(); ++i) {
        const ModeResult& d = r.rows[i].at(SparsityMode::Dense);
        EXPECT_EQ(d.compute_cycles, analytic_cost(n.layers[i], d.schedule, HwConfig{}).compute_cycles);
    }
}

TEST(Harness, ScheduleOverrideAndStrict) {
    NetworkConfig n = tiny_net();
    const Schedule forced = baseline_schedule(tpu_spec(), n.layers[1], HwConfig{});
    RunOptions o;
    o.schedules["c2"] = forced;
    const RunReport r = run_network(n, HwConfig{}, o);
    for (const ModeResult& m : r.rows[1].modes) EXPECT_EQ(m.schedule, forced);

    Schedule oversized = forced;
    oversized.partitioning.ic = 64;
    n.schedules["c1"] = oversized;
    RunOptions lenient;
    lenient.simulate = false;
    const RunReport partial = run_network(n, HwConfig{}, lenient);
    EXPECT_NE(partial.rows[0].error.find("ic_p_range"), std::string::npos) << partial.rows[0].error;
    EXPECT_TRUE(partial.rows[1].error.empty());
    EXPECT_EQ(partial.summary.failed, 1u);
    lenient.strict = true;
    EXPECT_THROW(run_network(n, HwConfig{}, lenient), ScheduleError);
}

TEST(Harness, ChainChecksDimensions) {
    NetworkConfig n;
    n.name = "chain";
    n.layers = {make_conv("a", 6, 6, 4, 3, 3, 8, 1, 1), make_conv("b", 6, 6, 8, 1, 1, 4)};
    apply_sparsity(n, 0.3, 0.2);
    RunOptions o;
    o.chain = true;
    const RunReport r = run_network(n, HwConfig{}, o);
    EXPECT_EQ(r.rows.size(), 2u);
    n.layers[1].ic = 5;
    n.layers[1].oc = 5;
    EXPECT_THROW(run_network(n, HwConfig{}, o), std::exception);
}

TEST(Harness, WriteReportAndTraces) {
    const fs::path dir = scratch_dir("report");
    RunOptions o;
    o.trace_dir = (dir / "traces").string();
    fs::create_directories(o.trace_dir);
    const RunReport r = run_network(tiny_net(), HwConfig{}, o);
    write_report(dir.string(), r);
    EXPECT_TRUE(fs::exists(dir / "report.csv"));
    EXPECT_TRUE(fs::exists(dir / "traces" / "c1.csv"));
    const Json j = read_json_file((dir / "report.json").string());
    EXPECT_EQ(j.at("layers").size(), 3u);
    std::ostringstream md;
    write_markdown(md, r.network, r.rows);
    EXPECT_NE(md.str().find("| c2 |"), std::string::npos);
}
