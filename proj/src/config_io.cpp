#include "flexnn/config_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace flexnn {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

std::string type_of(const Json& j) {
    if (j.is_number_integer()) return "integer " + j.dump();
    if (j.is_number()) return "number " + j.dump();
    return std::string(j.type_name());
}

/// Strict reader over one JSON object: typed, range-checked fields and
/// rejection of keys nobody asked for.
class Fields {
public:
    Fields(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_, "expected object, got " + type_of(j_));
    }

    bool has(const char* key) const { return j_.contains(key); }
    std::string at(const char* key) const { return path_ + "." + key; }

    const Json& raw(const char* key) {
        used_.insert(key);
        if (!j_.contains(key)) fail(path_, std::string("missing required field '") + key + "'");
        return j_.at(key);
    }

    std::int64_t integer(const char* key, std::int64_t lo, std::int64_t hi) {
        const Json& v = raw(key);
        if (!v.is_number_integer()) fail(at(key), "expected integer, got " + type_of(v));
        const std::int64_t x = v.get<std::int64_t>();
        if (x < lo || x > hi)
            fail(at(key), "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]");
        return x;
    }
    int integer(const char* key, int lo, int hi, int dflt) {
        return has(key) ? static_cast<int>(integer(key, std::int64_t{lo}, std::int64_t{hi})) : (used_.insert(key), dflt);
    }

    double number(const char* key, double lo, double hi) {
        const Json& v = raw(key);
        if (!v.is_number()) fail(at(key), "expected number, got " + type_of(v));
        const double x = v.get<double>();
        if (!(x >= lo && x <= hi)) {
            std::ostringstream os;
            os << "value " << x << " outside [" << lo << ", " << hi << "]";
            fail(at(key), os.str());
        }
        return x;
    }
    double number(const char* key, double lo, double hi, double dflt) {
        return has(key) ? number(key, lo, hi) : (used_.insert(key), dflt);
    }

    std::string string(const char* key) {
        const Json& v = raw(key);
        if (!v.is_string()) fail(at(key), "expected string, got " + type_of(v));
        return v.get<std::string>();
    }
    std::string string(const char* key, const std::string& dflt) {
        return has(key) ? string(key) : (used_.insert(key), dflt);
    }

    void done() const {
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k)) fail(path_ + "." + k, "unknown field");
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> used_;
};

template <class F>
auto translate(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
}

constexpr int kMaxDim = 1 << 16;

Factors parse_factors(const Json& j, const std::string& path) {
    Fields f(j, path);
    Factors x;
    x.ic = f.integer("ic", 1, kMaxDim, 1);
    x.oc = f.integer("oc", 1, kMaxDim, 1);
    x.ox = f.integer("ox", 1, kMaxDim, 1);
    x.oy = f.integer("oy", 1, kMaxDim, 1);
    f.done();
    return x;
}

Json factors_to_json(const Factors& x) { return Json{{"ic", x.ic}, {"oc", x.oc}, {"ox", x.ox}, {"oy", x.oy}}; }

EnergyRatios parse_ratios(const Json& j, const std::string& path, EnergyRatios r) {
    Fields f(j, path);
    r.pe = f.number("pe", 0.0, 1e9, r.pe);
    r.rf = f.number("rf", 0.0, 1e9, r.rf);
    r.sram = f.number("sram", 0.0, 1e9, r.sram);
    r.dram = f.number("dram", 0.0, 1e9, r.dram);
    r.noc = f.number("noc", 0.0, 1e9, r.noc);
    f.done();
    return r;
}

Json ratios_to_json(const EnergyRatios& r) {
    return Json{{"pe", r.pe}, {"rf", r.rf}, {"sram", r.sram}, {"dram", r.dram}, {"noc", r.noc}};
}

std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') ++line, col = 1;
        else ++col;
    }
    return {line, col};
}

}  // namespace

Json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ConfigError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": syntax error: " + e.what());
    }
}

void write_json_file(const std::string& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError(path + ": cannot write file");
    out << j.dump(2) << '\n';
}

// --- layers and networks ----------------------------------------------------

LayerDesc parse_layer(const Json& j, const std::string& path) {
    Fields f(j, path);
    LayerDesc l;
    l.id = f.string("id");
    if (l.id.empty()) fail(f.at("id"), "must not be empty");
    const std::string op = f.string("op", "conv");
    l.op = translate(f.at("op"), [&] { return op_from_string(op); });
    l.ix = static_cast<int>(f.integer("ix", 1, kMaxDim));
    l.iy = static_cast<int>(f.integer("iy", 1, kMaxDim));
    l.ic = static_cast<int>(f.integer("ic", 1, kMaxDim));
    if (l.op == OpType::Conv) {
        l.fx = static_cast<int>(f.integer("fx", 1, 64));
        l.fy = static_cast<int>(f.integer("fy", 1, 64));
        l.oc = static_cast<int>(f.integer("oc", 1, kMaxDim));
        l.stride = f.integer("stride", 1, 64, 1);
        l.groups = f.integer("groups", 1, kMaxDim, 1);
        if (f.has("pad") && f.raw("pad").is_array()) {
            const Json& p = f.raw("pad");
            if (p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer() || p[0].get<int>() < 0 ||
                p[1].get<int>() < 0)
                fail(f.at("pad"), "expected non-negative integer or [pad_x, pad_y]");
            l.pad_x = p[0].get<int>();
            l.pad_y = p[1].get<int>();
        } else {
            l.pad_x = l.pad_y = f.integer("pad", 0, 64, 0);
        }
    } else {
        l.oc = l.ic;
    }
    l.weight_sparsity = f.number("ws", 0.0, 1.0, 0.0);
    l.act_sparsity = f.number("as", 0.0, 1.0, 0.0);
    f.done();
    translate(path, [&] { l.check(); });
    return l;
}

Json layer_to_json(const LayerDesc& l) {
    Json j;
    j["id"] = l.id;
    j["op"] = to_string(l.op);
    j["ix"] = l.ix;
    j["iy"] = l.iy;
    j["ic"] = l.ic;
    if (l.op == OpType::Conv) {
        j["fx"] = l.fx;
        j["fy"] = l.fy;
        j["oc"] = l.oc;
        j["stride"] = l.stride;
        if (l.pad_x == l.pad_y) j["pad"] = l.pad_x;
        else j["pad"] = Json::array({l.pad_x, l.pad_y});
        if (l.groups != 1) j["groups"] = l.groups;
    }
    if (l.weight_sparsity != 0.0) j["ws"] = l.weight_sparsity;
    if (l.act_sparsity != 0.0) j["as"] = l.act_sparsity;
    return j;
}

NetworkConfig parse_network(const Json& j) {
    Fields f(j, "network");
    NetworkConfig n;
    n.name = f.string("name", "");
    const Json& layers = f.raw("layers");
    if (!layers.is_array()) fail(f.at("layers"), "expected array, got " + type_of(layers));
    if (layers.empty()) fail(f.at("layers"), "no layers");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string p = "layers[" + std::to_string(i) + "]";
        n.layers.push_back(parse_layer(layers[i], p));
        if (!ids.insert(n.layers.back().id).second) fail(p + ".id", "duplicate layer id '" + n.layers.back().id + "'");
    }
    if (f.has("schedules")) {
        const Json& s = f.raw("schedules");
        Fields check(s, "schedules");
        for (const auto& [id, v] : s.items()) {
            if (!ids.count(id)) fail("schedules." + id, "no layer with this id");
            n.schedules[id] = parse_schedule(v, "schedules." + id);
        }
    }
    f.done();
    return n;
}

Json network_to_json(const NetworkConfig& n) {
    Json j;
    j["name"] = n.name;
    j["layers"] = Json::array();
    for (const LayerDesc& l : n.layers) j["layers"].push_back(layer_to_json(l));
    if (!n.schedules.empty()) {
        Json s = Json::object();
        for (const auto& [id, sch] : n.schedules) s[id] = schedule_to_json(sch);
        j["schedules"] = s;
    }
    return j;
}

NetworkConfig load_network(const std::string& path) {
    try {
        return parse_network(read_json_file(path));
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.rfind(path, 0) == 0) throw;
        throw ConfigError(path + ": " + what);
    }
}

void save_network(const std::string& path, const NetworkConfig& n) { write_json_file(path, network_to_json(n)); }

// --- sparsity ---------------------------------------------------------------

SparsityStats parse_sparsity(const Json& j) {
    Fields f(j, "sparsity");
    SparsityStats s;
    f.string("note", "");
    s.network_weight_sparsity = f.number("ws", 0.0, 1.0, 0.0);
    s.network_act_sparsity = f.number("as", 0.0, 1.0, 0.0);
    if (f.has("layers")) {
        const Json& layers = f.raw("layers");
        if (!layers.is_array()) fail(f.at("layers"), "expected array, got " + type_of(layers));
        std::set<std::string> ids;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const std::string p = "sparsity.layers[" + std::to_string(i) + "]";
            Fields lf(layers[i], p);
            LayerSparsity ls;
            ls.id = lf.string("id");
            ls.weight_sparsity = lf.number("ws", 0.0, 1.0);
            ls.act_sparsity = lf.number("as", 0.0, 1.0);
            lf.done();
            if (!ids.insert(ls.id).second) fail(p + ".id", "duplicate layer id '" + ls.id + "'");
            s.layers.push_back(ls);
        }
    }
    f.done();
    return s;
}

Json sparsity_to_json(const SparsityStats& s) {
    Json j;
    j["ws"] = s.network_weight_sparsity;
    j["as"] = s.network_act_sparsity;
    j["layers"] = Json::array();
    for (const LayerSparsity& l : s.layers)
        j["layers"].push_back(Json{{"id", l.id}, {"ws", l.weight_sparsity}, {"as", l.act_sparsity}});
    return j;
}

SparsityStats load_sparsity(const std::string& path) {
    try {
        return parse_sparsity(read_json_file(path));
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.rfind(path, 0) == 0) throw;
        throw ConfigError(path + ": " + what);
    }
}

void save_sparsity(const std::string& path, const SparsityStats& s) { write_json_file(path, sparsity_to_json(s)); }

// --- hardware ---------------------------------------------------------------

HwConfig parse_hw(const Json& j) {
    Fields f(j, "hw");
    HwConfig hw;
    hw.rows = f.integer("rows", 1, 1024, hw.rows);
    hw.cols = f.integer("cols", 1, 1024, hw.cols);
    hw.macs_per_pe = f.integer("macs_per_pe", 1, 1024, hw.macs_per_pe);
    hw.subbanks = f.integer("subbanks", 1, 64, hw.subbanks);
    hw.if_rf_bytes = f.integer("if_rf_bytes", 1, 1 << 20, hw.if_rf_bytes);
    hw.fl_rf_bytes = f.integer("fl_rf_bytes", 1, 1 << 20, hw.fl_rf_bytes);
    hw.of_rf_bytes = f.integer("of_rf_bytes", 4, 1 << 20, hw.of_rf_bytes);
    hw.if_bmp_bytes = f.integer("if_bmp_bytes", 1, 1 << 20, hw.if_bmp_bytes);
    hw.fl_bmp_bytes = f.integer("fl_bmp_bytes", 1, 1 << 20, hw.fl_bmp_bytes);
    if (f.has("sram_bytes")) hw.sram_bytes = f.integer("sram_bytes", std::int64_t{1}, std::int64_t{1} << 40);
    hw.sram_port_bytes = f.integer("sram_port_bytes", 1, 1 << 16, hw.sram_port_bytes);
    hw.sram_ports = f.integer("sram_ports", 1, 1 << 16, hw.sram_ports);
    hw.freq_ghz = f.number("freq_ghz", 1e-6, 1e6, hw.freq_ghz);
    hw.rf_swap_cycles = f.integer("rf_swap_cycles", 0, 1 << 16, hw.rf_swap_cycles);
    hw.flextree_fill_cycles = f.integer("flextree_fill_cycles", 0, 1 << 16, hw.flextree_fill_cycles);
    hw.ppms_per_column = f.integer("ppms_per_column", 1, 1 << 16, hw.ppms_per_column);
    if (f.has("ratios")) hw.ratios = parse_ratios(f.raw("ratios"), f.at("ratios"), hw.ratios);
    if (f.has("baselines")) {
        const Json& b = f.raw("baselines");
        Fields check(b, f.at("baselines"));
        for (const auto& [name, v] : b.items()) {
            const std::string p = f.at("baselines") + "." + name;
            const BaselineSpec base = translate(p, [&] { return baseline_from_name(name); });
            Fields bf(v, p);
            if (bf.has("ratios")) parse_ratios(bf.raw("ratios"), p + ".ratios", base.ratios);
            bf.integer("pe_count", 1, 1 << 20, base.pe_count);
            bf.integer("rf_bytes", 1, 1 << 20, base.rf_bytes);
            bf.done();
        }
    }
    f.done();
    translate("hw", [&] { hw.check(); });
    return hw;
}

Json hw_to_json(const HwConfig& hw) {
    return Json{{"rows", hw.rows},
                {"cols", hw.cols},
                {"macs_per_pe", hw.macs_per_pe},
                {"subbanks", hw.subbanks},
                {"if_rf_bytes", hw.if_rf_bytes},
                {"fl_rf_bytes", hw.fl_rf_bytes},
                {"of_rf_bytes", hw.of_rf_bytes},
                {"if_bmp_bytes", hw.if_bmp_bytes},
                {"fl_bmp_bytes", hw.fl_bmp_bytes},
                {"sram_bytes", hw.sram_bytes},
                {"sram_port_bytes", hw.sram_port_bytes},
                {"sram_ports", hw.sram_ports},
                {"freq_ghz", hw.freq_ghz},
                {"rf_swap_cycles", hw.rf_swap_cycles},
                {"flextree_fill_cycles", hw.flextree_fill_cycles},
                {"ppms_per_column", hw.ppms_per_column},
                {"ratios", ratios_to_json(hw.ratios)}};
}

HwConfig load_hw(const std::string& path) {
    try {
        return parse_hw(read_json_file(path));
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.rfind(path, 0) == 0) throw;
        throw ConfigError(path + ": " + what);
    }
}

std::vector<BaselineSpec> load_baselines(const std::string& hw_path, const std::vector<std::string>& names) {
    Json overrides = Json::object();
    if (!hw_path.empty()) {
        const Json j = read_json_file(hw_path);
        parse_hw(j);
        if (j.contains("baselines")) overrides = j.at("baselines");
    }
    std::vector<BaselineSpec> out;
    for (const std::string& name : names) {
        BaselineSpec b = translate("--baselines", [&] { return baseline_from_name(name); });
        if (overrides.contains(name)) {
            const Json& v = overrides.at(name);
            const std::string p = "hw.baselines." + name;
            if (v.contains("ratios")) b.ratios = parse_ratios(v.at("ratios"), p + ".ratios", b.ratios);
            if (v.contains("pe_count")) b.pe_count = v.at("pe_count").get<int>();
            if (v.contains("rf_bytes")) b.rf_bytes = v.at("rf_bytes").get<int>();
        }
        out.push_back(b);
    }
    return out;
}

// --- schedules --------------------------------------------------------------

Schedule parse_schedule(const Json& j, const std::string& path) {
    Fields f(j, path);
    Schedule s;
    const std::string order = f.string("order");
    std::vector<Dim> dims;
    std::stringstream ss(order);
    std::string tok;
    while (std::getline(ss, tok, '>'))
        dims.push_back(translate(f.at("order"), [&] { return dim_from_string(tok); }));
    if (dims.size() != kNumDims) fail(f.at("order"), "expected six loops such as \"OC>IC>FY>OY>OX>FX\"");
    std::copy(dims.begin(), dims.end(), s.order.begin());
    if (!is_permutation(s.order)) fail(f.at("order"), "loops must be a permutation of OX,OY,IC,OC,FX,FY");
    const std::string tmpl = f.string("template", "VxV");
    s.tmpl = translate(f.at("template"), [&] { return template_from_string(tmpl); });
    s.blocking = parse_factors(f.raw("blocking"), f.at("blocking"));
    s.partitioning = parse_factors(f.raw("partitioning"), f.at("partitioning"));
    f.done();
    return s;
}

Json schedule_to_json(const Schedule& s) {
    return Json{{"order", to_string(s.order)},
                {"template", template_name(s.tmpl)},
                {"blocking", factors_to_json(s.blocking)},
                {"partitioning", factors_to_json(s.partitioning)}};
}

std::map<std::string, Schedule> load_schedules(const std::string& path) {
    const Json j = read_json_file(path);
    std::map<std::string, Schedule> out;
    try {
        if (j.is_object() && j.contains("order")) {
            out["*"] = parse_schedule(j, "schedule");
        } else {
            Fields check(j, "schedules");
            for (const auto& [id, v] : j.items()) out[id] = parse_schedule(v, "schedules." + id);
        }
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return out;
}

Json descriptor_to_json(const ConfigDescriptor& d) {
    Json regs = Json::array();
    for (std::uint32_t r : d.pack()) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "0x%08x", r);
        regs.push_back(buf);
    }
    return Json{{"registers", regs},
                {"order_code", d.order_code},
                {"template", template_name(d.tmpl)},
                {"eltwise", d.eltwise},
                {"routing", d.routing == Routing::FlexTree ? "flextree" : "internal"},
                {"tap_level", d.tap_level},
                {"psum_spill", d.psum_spill},
                {"blocking", factors_to_json(d.blocking)},
                {"partitioning", factors_to_json(d.partitioning)}};
}

}  // namespace flexnn
