#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "flexnn/cost_model.hpp"
#include "flexnn/hw_config.hpp"
#include "flexnn/schedule.hpp"
#include "flexnn/tensor.hpp"

namespace flexnn {

using Json = nlohmann::ordered_json;

/// Malformed or out-of-range configuration. The message starts with the file
/// (and line for syntax errors) or the JSON field path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NetworkConfig {
    std::string name;
    std::vector<LayerDesc> layers;
    /// Schedule overrides by layer id.
    std::map<std::string, Schedule> schedules;

    bool operator==(const NetworkConfig&) const = default;
};

/// Parses a file, reporting syntax errors as "file:line:col".
Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

LayerDesc parse_layer(const Json& j, const std::string& path = "layer");
Json layer_to_json(const LayerDesc& l);

NetworkConfig parse_network(const Json& j);
Json network_to_json(const NetworkConfig& n);
NetworkConfig load_network(const std::string& path);
void save_network(const std::string& path, const NetworkConfig& n);

SparsityStats parse_sparsity(const Json& j);
Json sparsity_to_json(const SparsityStats& s);
SparsityStats load_sparsity(const std::string& path);
void save_sparsity(const std::string& path, const SparsityStats& s);

/// Every field optional; missing ones keep the defaults.
HwConfig parse_hw(const Json& j);
Json hw_to_json(const HwConfig& hw);
HwConfig load_hw(const std::string& path);

/// Named baselines, with overrides from the "baselines" object of an hw file
/// (empty path: built-in defaults).
std::vector<BaselineSpec> load_baselines(const std::string& hw_path, const std::vector<std::string>& names);

Schedule parse_schedule(const Json& j, const std::string& path = "schedule");
Json schedule_to_json(const Schedule& s);
/// A single schedule object (key "*") or an object of schedules by layer id.
std::map<std::string, Schedule> load_schedules(const std::string& path);

Json descriptor_to_json(const ConfigDescriptor& d);

}  // namespace flexnn
