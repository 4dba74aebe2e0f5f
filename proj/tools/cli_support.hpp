#pragma once

// Plumbing shared by the odt subcommands: JSON option files, dataset
// directories and run manifests.

#include "CLI11.hpp"
#include "odt/odt.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef ODT_VERSION
#define ODT_VERSION "unknown"
#endif

namespace odt::cli {

namespace fs = std::filesystem;

/// Flat JSON object of option defaults: {"rank_origin": 4, "rates": [0.5, 0.9], "no_neighbors": true}.
/// Keys are long option names; underscores and dashes are interchangeable.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
        json j = json::object();
        for (const CLI::Option* opt : app->get_options()) {
            if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
            const std::string& name = opt->get_lnames().front();
            if (name == "help" || name == "config" || name == "out") continue;
            std::vector<std::string> values = opt->results();
            if (values.empty() && default_also) {
                if (!opt->get_default_str().empty()) values.push_back(opt->get_default_str());
                else if (opt->get_expected_min() == 0) values.push_back("false");
            }
            if (values.empty()) continue;
            std::string key = name;
            std::replace(key.begin(), key.end(), '-', '_');
            j[key] = values.size() == 1 ? json(values.front()) : json(values);
        }
        return j.dump(2);
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& is) const override {
        json j;
        try {
            j = json::parse(is);
        } catch (const json::parse_error& e) {
            throw CLI::ConfigError(std::string("config file is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConfigError("config file must hold a JSON object");
        std::vector<CLI::ConfigItem> items;
        for (const auto& [key, value] : j.items()) {
            CLI::ConfigItem item;
            item.name = key;
            std::replace(item.name.begin(), item.name.end(), '_', '-');
            if (value.is_array()) {
                for (const auto& v : value) item.inputs.push_back(scalar(key, v));
            } else {
                item.inputs.push_back(scalar(key, value));
            }
            items.push_back(std::move(item));
        }
        return items;
    }

private:
    static std::string scalar(const std::string& key, const json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number()) return v.dump();
        throw CLI::ConfigError("config key '" + key + "' must be a string, number, boolean or array of those");
    }
};

/// Applies a JSON option file to a parsed subcommand. Options already given on
/// the command line keep their values; unknown keys are errors.
inline void apply_config(CLI::App* sub, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw CLI::ConfigError("cannot open config file " + path);
    for (const auto& item : JsonConfig{}.from_config(is)) {
        CLI::Option* opt = sub->get_option_no_throw("--" + item.name);
        if (opt == nullptr || item.name == "config")
            throw CLI::ConfigError("unknown key '" + item.name + "' in " + path);
        if (opt->count() > 0) continue;
        for (const auto& v : item.inputs) opt->add_result(v);
        opt->run_callback();
    }
}

/// 64-bit FNV-1a.
[[nodiscard]] inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

[[nodiscard]] inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Resolution order: --out (or "out" in the config file), then ODT_OUTPUT_DIR, then ./odt-out.
[[nodiscard]] inline fs::path output_dir(const std::string& flag) {
    fs::path dir = "odt-out";
    if (!flag.empty()) dir = flag;
    else if (const char* env = std::getenv("ODT_OUTPUT_DIR"); env && *env) dir = env;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw input_error("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

[[nodiscard]] inline std::ifstream open_input(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw input_error("cannot open " + path.string());
    return is;
}

[[nodiscard]] inline std::ofstream open_output(const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw input_error("cannot write " + path.string());
    return os;
}

/// Records how a run was produced. Rerunning with the same config yields the same numbers.
inline void write_manifest(const fs::path& dir, const CLI::App& sub, std::optional<std::uint64_t> seed,
                           const std::vector<std::string>& outputs) {
    const json config = json::parse(sub.config_to_str(true, false));
    json m = {{"tool", "odt"},
              {"command", sub.get_name()},
              {"config", config},
              {"config_hash", "fnv1a64:" + hex64(fnv1a(config.dump()))},
              {"versions",
               {{"odt", ODT_VERSION},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)},
                {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                {"cli11", CLI11_VERSION}}},
              {"outputs", outputs}};
    m["seed"] = seed ? json(*seed) : json(nullptr);
    write_json(dir / "manifest.json", m);
}

// ---- dataset directories -----------------------------------------------------
//
//   dataset.json   zones, slices, inactive context zones, whether a graph exists
//   tensor.odt     log-volume tensor R
//   context.odt    context matrix W
//   adjacency.csv  neighbor pairs (optional)

struct Dataset {
    Tensor3 r;
    ContextMatrix context;
    std::optional<NeighborGraph> graph;

    [[nodiscard]] std::size_t zones() const { return r.dims()[0]; }
    [[nodiscard]] std::size_t slices() const { return r.dims()[2]; }
};

inline void save_dataset(const fs::path& dir, const Dataset& ds) {
    std::vector<std::size_t> inactive;
    for (std::size_t p = 0; p < ds.context.active.size(); ++p)
        if (!ds.context.active[p]) inactive.push_back(p);
    write_json(dir / "dataset.json", {{"format", "odt-dataset"},
                                      {"version", 1},
                                      {"zones", ds.zones()},
                                      {"slices", ds.slices()},
                                      {"inactive_context_zones", inactive},
                                      {"graph", ds.graph.has_value()}});
    io::write_tensor(dir / "tensor.odt", ds.r);
    io::write_matrix(dir / "context.odt", ds.context.w);
    if (ds.graph) {
        auto os = open_output(dir / "adjacency.csv");
        write_adjacency_csv(os, *ds.graph);
    }
}

[[nodiscard]] inline Dataset load_dataset(const fs::path& dir) {
    const json meta = read_json(dir / "dataset.json");
    try {
        if (meta.at("format") != "odt-dataset") throw input_error(dir.string() + ": not a dataset directory");
        Dataset ds;
        ds.r = io::read_tensor(dir / "tensor.odt");
        const auto zones = meta.at("zones").get<std::size_t>();
        const auto slices = meta.at("slices").get<std::size_t>();
        if (ds.r.dims() != Tensor3::Dims{zones, zones, slices})
            throw input_error(dir.string() + ": tensor dims disagree with dataset.json");
        ds.context = ContextMatrix::dense(io::read_matrix(dir / "context.odt"));
        if (ds.context.zones() != zones || ds.context.w.cols() != ds.context.w.rows())
            throw input_error(dir.string() + ": context matrix must be zones x zones");
        for (auto p : meta.at("inactive_context_zones").get<std::vector<std::size_t>>()) {
            if (p >= zones) throw input_error(dir.string() + ": inactive zone index out of range");
            ds.context.active[p] = false;
        }
        if (meta.at("graph").get<bool>()) {
            auto is = open_input(dir / "adjacency.csv");
            ds.graph = read_adjacency_csv(is, zones, (dir / "adjacency.csv").string());
        }
        return ds;
    } catch (const json::exception& e) {
        throw input_error(dir.string() + "/dataset.json: " + e.what());
    }
}

// ---- CSV helpers -------------------------------------------------------------

[[nodiscard]] inline std::string num(double v) { return io::format_double(v); }

/// Shortest decimal that reads back to the same double (for parameter columns).
[[nodiscard]] inline std::string short_num(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace odt::cli
