#include "flexnn/harness.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "flexnn/rng.hpp"

namespace flexnn {

void apply_sparsity(NetworkConfig& net, const SparsityStats& stats) {
    std::map<std::string, const LayerSparsity*> by_id;
    for (const LayerSparsity& l : stats.layers) by_id[l.id] = &l;
    for (LayerDesc& l : net.layers) {
        const auto it = by_id.find(l.id);
        l.weight_sparsity = it != by_id.end() ? it->second->weight_sparsity : stats.network_weight_sparsity;
        l.act_sparsity = it != by_id.end() ? it->second->act_sparsity : stats.network_act_sparsity;
    }
}

void apply_sparsity(NetworkConfig& net, double ws, double as) {
    SparsityStats s;
    s.network_weight_sparsity = ws;
    s.network_act_sparsity = as;
    apply_sparsity(net, s);
}

double LayerRow::speedup(SparsityMode m) const {
    const std::int64_t c = at(m).compute_cycles;
    return c > 0 ? double(at(SparsityMode::Dense).compute_cycles) / double(c) : 1.0;
}

namespace {

Requant layer_requant(const LayerDesc& l) {
    const auto n = static_cast<unsigned>(l.op == OpType::Conv ? l.ic_per_group() * l.fx * l.fy : 1);
    return {1, 6 + static_cast<int>(std::bit_width(n)) / 2, true};
}

std::string file_safe(const std::string& id) {
    std::string s = id;
    for (char& c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
    return s;
}

std::optional<Schedule> override_for(const RunOptions& opt, const NetworkConfig& net, const std::string& id) {
    if (auto it = opt.schedules.find(id); it != opt.schedules.end()) return it->second;
    if (auto it = opt.schedules.find("*"); it != opt.schedules.end()) return it->second;
    if (auto it = net.schedules.find(id); it != net.schedules.end()) return it->second;
    return std::nullopt;
}

void fill(ModeResult& m, const SimResult& r, const HwConfig& hw) {
    m.compute_cycles = r.compute_cycles;
    m.total_cycles = r.total_cycles;
    m.macs_executed = r.macs_executed;
    m.access = r.access;
    m.energy = energy(r, hw.ratios).total();
}

void fill(ModeResult& m, const CostEstimate& c) {
    m.compute_cycles = c.compute_cycles;
    m.total_cycles = c.total_cycles;
    m.macs_executed = c.macs;
    m.access = c.access;
    m.energy = c.energy.total();
}

/// One layer; `chained_in` replaces the synthesized IF when set. Returns the
/// ofmap of `opt.mode` when `want_ofmap`.
Tensor4 run_layer(const NetworkConfig& net, std::size_t index, const HwConfig& hw, const RunOptions& opt,
                  const Tensor4* chained_in, bool want_ofmap, LayerRow& row) {
    const LayerDesc& l = net.layers[index];
    row.id = l.id;
    row.op = l.op;
    row.dense_macs = l.dense_macs();
    row.ws = l.weight_sparsity;
    row.as = l.act_sparsity;

    const std::optional<Schedule> forced = override_for(opt, net, l.id);
    if (forced) require_valid(l, *forced, hw);
    for (SparsityMode m : kAllModes) {
        ModeResult& mr = row.modes[static_cast<std::size_t>(m)];
        const SparsityHint hint{m, l.weight_sparsity, l.act_sparsity};
        mr.schedule = forced ? *forced : find_optimal(l, hw, opt.objective, hint).schedule;
        if (!opt.simulate) fill(mr, analytic_cost(l, mr.schedule, hw, hint));
    }
    if (!opt.simulate) {
        for (const BaselineSpec& b : opt.baselines)
            row.reductions.emplace_back(b.name, compare_analytic(l, {b}, hw, opt.equal_ratios).rows[0].reduction);
        return {};
    }

    const std::uint64_t base = mix_seed(opt.seed, index);
    const Tensor4 in = chained_in ? *chained_in : gen_sparse_tensor(l.if_dims(), l.act_sparsity, mix_seed(base, 0));
    const double second = l.op == OpType::Eltwise ? l.act_sparsity : l.weight_sparsity;
    const Tensor4 fl = gen_sparse_tensor(l.fl_dims(), second, mix_seed(base, 1));

    Tensor4 out;
    for (SparsityMode m : kAllModes) {
        SimOptions so;
        so.mode = m;
        so.requant = layer_requant(l);
        so.functional = want_ofmap && m == opt.mode;
        std::ofstream trace;
        if (!opt.trace_dir.empty() && m == opt.mode) {
            trace.open(std::filesystem::path(opt.trace_dir) / (file_safe(l.id) + ".csv"), std::ios::binary);
            so.trace = &trace;
        }
        SimResult r = simulate_layer(l, row.modes[static_cast<std::size_t>(m)].schedule, in, fl, hw, so);
        fill(row.modes[static_cast<std::size_t>(m)], r, hw);
        if (so.functional) out = std::move(r.ofmap);
    }
    if (!opt.baselines.empty()) {
        CompareOptions co;
        co.mode = opt.mode;
        co.equal_ratios = opt.equal_ratios;
        for (const CompareRow& c : compare(l, in, fl, opt.baselines, hw, co).rows)
            row.reductions.emplace_back(c.baseline, c.reduction);
    }
    return out;
}

void check_chain(const std::vector<LayerDesc>& layers) {
    for (std::size_t i = 1; i < layers.size(); ++i) {
        const Dims4 want = layers[i].if_dims(), have = layers[i - 1].of_dims();
        if (!(want == have))
            throw ConfigError("--chain: layer '" + layers[i].id + "' expects input " + to_string(want) + " but '" +
                              layers[i - 1].id + "' produces " + to_string(have));
    }
}

}  // namespace

RunReport run_network(const NetworkConfig& net, const HwConfig& hw, const RunOptions& opt) {
    hw.check();
    if (net.layers.empty()) throw ConfigError("network: no layers");
    RunReport rep;
    rep.network = net.name;
    rep.seed = opt.seed;
    rep.objective = opt.objective;
    rep.mode = opt.mode;
    rep.simulated = opt.simulate;
    rep.hw = hw;
    for (const BaselineSpec& b : opt.baselines) rep.baselines.push_back(b.name);

    const std::size_t n = opt.limit ? std::min(opt.limit, net.layers.size()) : net.layers.size();
    rep.rows.resize(n);
    std::vector<std::string> errors(n), fatal(n);
    const auto guarded = [&](std::size_t i, const Tensor4* in, bool want) {
        Tensor4 out;
        try {
            out = run_layer(net, i, hw, opt, in, want, rep.rows[i]);
        } catch (const ScheduleError& e) {
            errors[i] = e.what();
        } catch (const std::exception& e) {
            fatal[i] = "layer '" + net.layers[i].id + "': " + e.what();
        }
        return out;
    };

    if (opt.chain && opt.simulate) {
        check_chain(std::vector<LayerDesc>(net.layers.begin(), net.layers.begin() + static_cast<std::ptrdiff_t>(n)));
        Tensor4 carry;
        for (std::size_t i = 0; i < n; ++i) {
            carry = guarded(i, i == 0 ? nullptr : &carry, true);
            if (!errors[i].empty()) {
                if (opt.strict) throw ScheduleError(errors[i]);
                // The chain cannot continue past an unmapped layer; the rest are synthesized.
                for (std::size_t j = i + 1; j < n; ++j) guarded(j, nullptr, false);
                break;
            }
        }
    } else {
#pragma omp parallel for schedule(dynamic, 1)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
            guarded(static_cast<std::size_t>(i), nullptr, false);
    }

    for (const std::string& f : fatal)
        if (!f.empty()) throw std::runtime_error(f);
    for (std::size_t i = 0; i < n; ++i) {
        if (errors[i].empty()) continue;
        if (opt.strict) throw ScheduleError(errors[i]);
        LayerRow& row = rep.rows[i];
        const LayerDesc& l = net.layers[i];
        row = LayerRow{};
        row.id = l.id;
        row.op = l.op;
        row.dense_macs = l.dense_macs();
        row.ws = l.weight_sparsity;
        row.as = l.act_sparsity;
        row.error = errors[i];
    }
    rep.summary = aggregate(net.name, rep.rows);
    return rep;
}

NetworkSummary aggregate(const std::string& name, const std::vector<LayerRow>& rows) {
    if (rows.empty()) throw std::invalid_argument("aggregate: no rows");
    NetworkSummary s;
    s.name = name;
    s.layers = rows.size();
    for (const LayerRow& r : rows) {
        if (!r.error.empty()) {
            ++s.failed;
            continue;
        }
        for (std::size_t m = 0; m < 3; ++m) {
            s.cycles[m] += r.modes[m].compute_cycles;
            s.energy[m] += r.modes[m].energy;
        }
    }
    const auto ratio = [&](std::size_t m) { return s.cycles[m] > 0 ? double(s.cycles[0]) / double(s.cycles[m]) : 1.0; };
    s.speedup_weight = ratio(1);
    s.speedup_two = ratio(2);
    return s;
}

double geomean(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("geomean: empty input");
    double acc = 0;
    for (double x : xs) {
        if (!(x > 0)) throw std::invalid_argument("geomean: non-positive value");
        acc += std::log(x);
    }
    return std::exp(acc / double(xs.size()));
}

// --- persistence ------------------------------------------------------------

namespace {

constexpr const char* kModeKeys[3] = {"dense", "weight", "two"};

std::string num(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

void csv_line(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << csv_field(fields[i]);
    os << "\r\n";
}

/// One RFC 4180 record; false at end of input.
bool csv_record(std::istream& is, std::vector<std::string>& out) {
    out.clear();
    if (is.peek() == std::char_traits<char>::eof()) return false;
    std::string field;
    bool quoted = false;
    for (char c; is.get(c);) {
        if (quoted) {
            if (c == '"') {
                if (is.peek() == '"') field += static_cast<char>(is.get());
                else quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && is.peek() == '\n') is.get();
            break;
        } else {
            field += c;
        }
    }
    if (quoted) throw std::invalid_argument("csv: unterminated quoted field");
    out.push_back(std::move(field));
    return true;
}

std::vector<std::string> csv_header(const std::vector<std::string>& baselines) {
    std::vector<std::string> h = {"id", "op", "dense_macs", "ws", "as"};
    for (const char* k : kModeKeys) h.push_back(std::string("schedule_") + k);
    for (const char* k : kModeKeys) h.push_back(std::string("cycles_") + k);
    for (const char* k : kModeKeys) h.push_back(std::string("total_cycles_") + k);
    for (const char* k : kModeKeys) h.push_back(std::string("macs_") + k);
    for (const char* k : kModeKeys) h.push_back(std::string("energy_") + k);
    h.push_back("speedup_weight");
    h.push_back("speedup_two");
    for (const std::string& b : baselines) h.push_back("reduction_" + b);
    h.push_back("error");
    return h;
}

}  // namespace

void write_csv(std::ostream& os, const RunReport& r) {
    csv_line(os, csv_header(r.baselines));
    for (const LayerRow& row : r.rows) {
        std::vector<std::string> f = {row.id, to_string(row.op), std::to_string(row.dense_macs), num(row.ws),
                                      num(row.as)};
        const bool ok = row.error.empty();
        for (const ModeResult& m : row.modes) f.push_back(ok ? summary(m.schedule) : "");
        for (const ModeResult& m : row.modes) f.push_back(std::to_string(m.compute_cycles));
        for (const ModeResult& m : row.modes) f.push_back(std::to_string(m.total_cycles));
        for (const ModeResult& m : row.modes) f.push_back(std::to_string(m.macs_executed));
        for (const ModeResult& m : row.modes) f.push_back(num(m.energy));
        f.push_back(num(ok ? row.speedup(SparsityMode::WeightSided) : 0.0));
        f.push_back(num(ok ? row.speedup(SparsityMode::TwoSided) : 0.0));
        for (std::size_t b = 0; b < r.baselines.size(); ++b)
            f.push_back(b < row.reductions.size() ? num(row.reductions[b].second) : "");
        f.push_back(row.error);
        csv_line(os, f);
    }
}

std::vector<LayerRow> read_csv(std::istream& is) {
    std::vector<std::string> header, rec;
    if (!csv_record(is, header)) throw std::invalid_argument("csv: empty report");
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* need : {"id", "op", "dense_macs", "cycles_dense", "cycles_two", "error"})
        if (!col.count(need)) throw std::invalid_argument(std::string("csv: missing column '") + need + "'");
    std::vector<std::string> baselines;
    for (const std::string& h : header)
        if (h.rfind("reduction_", 0) == 0) baselines.push_back(h.substr(10));

    std::vector<LayerRow> rows;
    std::size_t line = 1;
    while (csv_record(is, rec)) {
        ++line;
        if (rec.size() == 1 && rec[0].empty()) continue;
        if (rec.size() != header.size())
            throw std::invalid_argument("csv: line " + std::to_string(line) + " has " + std::to_string(rec.size()) +
                                        " fields, expected " + std::to_string(header.size()));
        const auto get = [&](const std::string& k) -> const std::string& { return rec[col.at(k)]; };
        LayerRow r;
        r.id = get("id");
        r.op = op_from_string(get("op"));
        r.dense_macs = std::stoll(get("dense_macs"));
        r.ws = std::stod(get("ws"));
        r.as = std::stod(get("as"));
        for (std::size_t m = 0; m < 3; ++m) {
            r.modes[m].compute_cycles = std::stoll(get(std::string("cycles_") + kModeKeys[m]));
            r.modes[m].total_cycles = std::stoll(get(std::string("total_cycles_") + kModeKeys[m]));
            r.modes[m].macs_executed = std::stoll(get(std::string("macs_") + kModeKeys[m]));
            r.modes[m].energy = std::stod(get(std::string("energy_") + kModeKeys[m]));
        }
        for (const std::string& b : baselines) {
            const std::string& v = get("reduction_" + b);
            if (!v.empty()) r.reductions.emplace_back(b, std::stod(v));
        }
        r.error = get("error");
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

Json access_to_json(const AccessCounts& a) {
    return Json{{"rf_reads", a.rf_reads},       {"rf_writes", a.rf_writes},     {"sram_reads", a.sram_reads},
                {"sram_writes", a.sram_writes}, {"dram_reads", a.dram_reads}, {"dram_writes", a.dram_writes},
                {"noc_bytes", a.noc_bytes}};
}

Json summary_to_json(const NetworkSummary& s) {
    Json j{{"layers", s.layers}, {"failed", s.failed}};
    for (std::size_t m = 0; m < 3; ++m) {
        j[std::string("cycles_") + kModeKeys[m]] = s.cycles[m];
        j[std::string("energy_") + kModeKeys[m]] = s.energy[m];
    }
    j["speedup_weight"] = s.speedup_weight;
    j["speedup_two"] = s.speedup_two;
    return j;
}

}  // namespace

Json report_to_json(const RunReport& r) {
    Json j;
    j["network"] = r.network;
    j["seed"] = r.seed;
    j["objective"] = objective_name(r.objective);
    j["mode"] = mode_name(r.mode);
    j["simulated"] = r.simulated;
    j["hw"] = hw_to_json(r.hw);
    j["baselines"] = r.baselines;
    Json layers = Json::array();
    for (const LayerRow& row : r.rows) {
        Json l{{"id", row.id}, {"op", to_string(row.op)}, {"dense_macs", row.dense_macs}, {"ws", row.ws},
               {"as", row.as}};
        if (!row.error.empty()) {
            l["error"] = row.error;
        } else {
            Json modes;
            for (std::size_t m = 0; m < 3; ++m) {
                const ModeResult& mr = row.modes[m];
                modes[kModeKeys[m]] = Json{{"schedule", schedule_to_json(mr.schedule)},
                                           {"compute_cycles", mr.compute_cycles},
                                           {"total_cycles", mr.total_cycles},
                                           {"macs_executed", mr.macs_executed},
                                           {"energy", mr.energy},
                                           {"access", access_to_json(mr.access)}};
            }
            l["modes"] = modes;
            l["speedup_weight"] = row.speedup(SparsityMode::WeightSided);
            l["speedup_two"] = row.speedup(SparsityMode::TwoSided);
            Json red = Json::object();
            for (const auto& [b, v] : row.reductions) red[b] = v;
            l["reductions"] = red;
        }
        layers.push_back(l);
    }
    j["layers"] = layers;
    j["summary"] = summary_to_json(r.summary);
    return j;
}

void write_markdown(std::ostream& os, const std::string& name, const std::vector<LayerRow>& rows) {
    std::vector<std::string> baselines;
    for (const LayerRow& r : rows)
        for (const auto& [b, v] : r.reductions)
            if (std::find(baselines.begin(), baselines.end(), b) == baselines.end()) baselines.push_back(b);
    const auto fixed = [](double x, int digits) {
        std::ostringstream s;
        s.setf(std::ios::fixed);
        s.precision(digits);
        s << x;
        return s.str();
    };

    os << "| layer | MACs | dense cycles | weight cycles | two cycles | weight x | two x |";
    for (const std::string& b : baselines) os << " vs " << b << " |";
    os << "\n|---|---:|---:|---:|---:|---:|---:|";
    for (std::size_t i = 0; i < baselines.size(); ++i) os << "---:|";
    os << '\n';
    for (const LayerRow& r : rows) {
        os << "| " << r.id << " | " << r.dense_macs << " | ";
        if (!r.error.empty()) {
            os << "unmapped | | | | |";
            for (std::size_t i = 0; i < baselines.size(); ++i) os << " |";
            os << '\n';
            continue;
        }
        os << r.modes[0].compute_cycles << " | " << r.modes[1].compute_cycles << " | " << r.modes[2].compute_cycles
           << " | " << fixed(r.speedup(SparsityMode::WeightSided), 2) << " | "
           << fixed(r.speedup(SparsityMode::TwoSided), 2) << " |";
        for (const std::string& b : baselines) {
            const auto it = std::find_if(r.reductions.begin(), r.reductions.end(),
                                         [&](const auto& p) { return p.first == b; });
            os << ' ' << (it == r.reductions.end() ? "" : fixed(100.0 * it->second, 1) + "%") << " |";
        }
        os << '\n';
    }
    const NetworkSummary s = aggregate(name, rows);
    os << "\n**" << (name.empty() ? "network" : name) << "**: " << s.layers << " layers";
    if (s.failed) os << " (" << s.failed << " unmapped)";
    os << ", speedup over dense " << fixed(s.speedup_weight, 2) << "x weight-sided, " << fixed(s.speedup_two, 2)
       << "x two-sided\n";
}

void write_report(const std::string& dir, const RunReport& r) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream csv(std::filesystem::path(dir) / "report.csv", std::ios::binary);
        write_csv(csv, r);
        if (!csv) throw std::runtime_error(dir + "/report.csv: write failed");
    }
    write_json_file((std::filesystem::path(dir) / "report.json").string(), report_to_json(r));
}

}  // namespace flexnn
