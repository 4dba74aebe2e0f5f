#pragma once

// JSON serialization of hyperparameters and fitted models.
//
// Matrices are stored as arrays of rows, the core as {"dims": [I, J, K],
// "values": [...]} in storage order. Doubles round-trip exactly.

#include "odt/errors.hpp"
#include "odt/model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace odt {

using json = nlohmann::json;

[[nodiscard]] inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

[[nodiscard]] inline Matrix matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array()) throw input_error(what + ": expected an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw input_error(what + ": ragged rows");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

[[nodiscard]] inline json tensor_to_json(const Tensor3& t) {
    const auto v = t.values();
    return {{"dims", t.dims()}, {"values", std::vector<double>(v.begin(), v.end())}};
}

[[nodiscard]] inline Tensor3 tensor_from_json(const json& j, const std::string& what) {
    try {
        const auto dims = j.at("dims").get<Tensor3::Dims>();
        return Tensor3(dims, j.at("values").get<std::vector<double>>());
    } catch (const json::exception& e) {
        throw input_error(what + ": " + e.what());
    } catch (const input_error& e) {
        throw input_error(what + ": " + e.what());
    }
}

[[nodiscard]] inline json to_json(const Hyperparameters& h) {
    return {{"ranks", {{"origin", h.ranks.origin}, {"destination", h.ranks.destination}, {"time", h.ranks.time}}},
            {"context_origin", h.context_origin},
            {"context_destination", h.context_destination},
            {"sparsity_origin", h.sparsity_origin},
            {"sparsity_destination", h.sparsity_destination},
            {"sparsity_time", h.sparsity_time},
            {"sparsity_core", h.sparsity_core},
            {"max_rounds", h.max_rounds},
            {"tolerance", h.tolerance},
            {"neighbor_regularization", h.neighbor_regularization},
            {"nr_sigma", h.nr_sigma},
            {"nr_epsilon_floor", h.nr_epsilon_floor}};
}

/// Overlays the keys present in `j` onto `base`; unknown keys are rejected.
[[nodiscard]] inline Hyperparameters hyperparameters_from_json(const json& j, Hyperparameters base = {}) {
    if (!j.is_object()) throw input_error("hyperparameters must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "ranks") {
                for (const auto& [rk, rv] : value.items()) {
                    if (rk == "origin") base.ranks.origin = rv.get<std::size_t>();
                    else if (rk == "destination") base.ranks.destination = rv.get<std::size_t>();
                    else if (rk == "time") base.ranks.time = rv.get<std::size_t>();
                    else throw input_error("unknown rank key '" + rk + "'");
                }
            } else if (key == "context_origin") base.context_origin = value.get<double>();
            else if (key == "context_destination") base.context_destination = value.get<double>();
            else if (key == "sparsity_origin") base.sparsity_origin = value.get<double>();
            else if (key == "sparsity_destination") base.sparsity_destination = value.get<double>();
            else if (key == "sparsity_time") base.sparsity_time = value.get<double>();
            else if (key == "sparsity_core") base.sparsity_core = value.get<double>();
            else if (key == "max_rounds") base.max_rounds = value.get<std::size_t>();
            else if (key == "tolerance") base.tolerance = value.get<double>();
            else if (key == "neighbor_regularization") base.neighbor_regularization = value.get<bool>();
            else if (key == "nr_sigma") base.nr_sigma = value.get<double>();
            else if (key == "nr_epsilon_floor") base.nr_epsilon_floor = value.get<double>();
            else throw input_error("unknown hyperparameter '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw input_error(std::string("hyperparameters: ") + e.what());
    }
    base.validate();
    return base;
}

[[nodiscard]] inline json to_json(const FactorModel& m) {
    return {{"core", tensor_to_json(m.core)},
            {"origin", matrix_to_json(m.origin)},
            {"destination", matrix_to_json(m.destination)},
            {"time", matrix_to_json(m.time)}};
}

[[nodiscard]] inline FactorModel model_from_json(const json& j) {
    try {
        FactorModel m{tensor_from_json(j.at("core"), "core"), matrix_from_json(j.at("origin"), "origin"),
                      matrix_from_json(j.at("destination"), "destination"), matrix_from_json(j.at("time"), "time")};
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw input_error(std::string("model: ") + e.what());
    }
}

/// A fitted model plus what produced it.
struct Checkpoint {
    std::string kind = "tucker";  // "tucker" or "cp"; cp checkpoints carry a superdiagonal core
    FactorModel model;
    Hyperparameters hyperparameters;
    std::vector<double> objective_history;
    std::uint64_t seed = 0;
    std::size_t rounds = 0;
    bool converged = false;
};

[[nodiscard]] inline json to_json(const Checkpoint& c) {
    return {{"format", "odt-checkpoint"},
            {"version", 1},
            {"kind", c.kind},
            {"seed", c.seed},
            {"rounds", c.rounds},
            {"converged", c.converged},
            {"hyperparameters", to_json(c.hyperparameters)},
            {"objective_history", c.objective_history},
            {"model", to_json(c.model)}};
}

[[nodiscard]] inline Checkpoint checkpoint_from_json(const json& j) {
    try {
        if (j.at("format") != "odt-checkpoint") throw input_error("not a checkpoint file");
        if (j.at("version") != 1) throw input_error("unsupported checkpoint version");
        Checkpoint c;
        c.kind = j.at("kind").get<std::string>();
        if (c.kind != "tucker" && c.kind != "cp") throw input_error("unknown checkpoint kind '" + c.kind + "'");
        c.seed = j.at("seed").get<std::uint64_t>();
        c.rounds = j.at("rounds").get<std::size_t>();
        c.converged = j.at("converged").get<bool>();
        c.hyperparameters = hyperparameters_from_json(j.at("hyperparameters"));
        c.objective_history = j.at("objective_history").get<std::vector<double>>();
        c.model = model_from_json(j.at("model"));
        return c;
    } catch (const json::exception& e) {
        throw input_error(std::string("checkpoint: ") + e.what());
    }
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw input_error("cannot write " + path.string());
    os << j.dump(2) << '\n';
    if (!os) throw input_error("write failed: " + path.string());
}

[[nodiscard]] inline json read_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw input_error("cannot open " + path.string());
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw input_error(path.string() + ": " + e.what());
    }
}

}  // namespace odt
