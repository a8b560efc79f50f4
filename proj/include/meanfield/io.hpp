#pragma once

// JSON model/config parsing and CSV/JSON artifact writers. Output is fully
// deterministic (fixed float formatting, no timestamps) so re-running a config
// reproduces artifacts byte for byte.

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "meanfield/emissions.hpp"
#include "meanfield/lq_model.hpp"
#include "meanfield/time_grid.hpp"

namespace meanfield {

using nlohmann::json;

// Scalar entries broadcast to the grid; arrays must carry one value per node.
inline Sampled sampled_from_json(const json& j, const TimeGrid& grid, const std::string& key) {
    const json& v = j.at(key);
    if (v.is_number()) return Sampled(grid, v.get<double>());
    if (v.is_array()) {
        std::vector<double> vals = v.get<std::vector<double>>();
        if (static_cast<int>(vals.size()) != grid.n_nodes())
            throw std::invalid_argument("model key '" + key + "' must have n_steps+1 samples");
        return Sampled(grid, std::move(vals));
    }
    throw json::type_error::create(302, "model key '" + key + "' must be a number or array", &v);
}

inline LQModel lq_model_from_json(const json& j) {
    const TimeGrid grid(j.at("T").get<double>(), j.at("n_steps").get<int>());
    return LQModel(grid, sampled_from_json(j, grid, "a"), sampled_from_json(j, grid, "abar"),
                   sampled_from_json(j, grid, "b"), sampled_from_json(j, grid, "beta"),
                   sampled_from_json(j, grid, "m"), sampled_from_json(j, grid, "mbar"),
                   sampled_from_json(j, grid, "n"), j.at("q").get<double>(),
                   j.at("qbar").get<double>(), j.at("sigma").get<double>(),
                   j.at("x0").get<double>());
}

inline EmissionsModel emissions_model_from_json(const json& j) {
    return EmissionsModel(j.at("lambda").get<double>(), j.at("cap").get<double>(),
                          j.at("sigma").get<double>(), j.at("T").get<double>(),
                          j.at("x0").get<double>());
}

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& columns) {
    if (header.size() != columns.size())
        throw std::invalid_argument("write_csv: header/column count mismatch");
    std::ofstream out(path, std::ios::binary);  // binary: no platform newline surprises
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    for (std::size_t c = 0; c < header.size(); ++c)
        out << header[c] << (c + 1 < header.size() ? "," : "\n");
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < columns.size(); ++c)
            out << format_number(columns[c][r]) << (c + 1 < columns.size() ? "," : "\n");
}

inline void write_json(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_json: cannot open " + path);
    out << j.dump(2) << "\n";
}

}  // namespace meanfield
