#pragma once

// File formats: point-cloud CSV (id,x1..xd), distance-matrix CSV, the
// little-endian binary distance block (u64 count + row-major f64), JSON
// serialization of smooth-map trees and atlases.

#include <string>

#include "json.hpp"  // vendored nlohmann single header

#include "reifenberg/atlas.hpp"
#include "reifenberg/metric_space.hpp"
#include "reifenberg/smooth_map.hpp"

namespace reifenberg::io {

// Auto-detects by extension: .csv (header decides cloud vs matrix), .bin.
core::FiniteMetricSpace load_space(const std::string& path);

core::FiniteMetricSpace load_cloud_csv(const std::string& path);
core::FiniteMetricSpace load_matrix_csv(const std::string& path);
core::FiniteMetricSpace load_matrix_bin(const std::string& path);

void save_matrix_bin(const core::FiniteMetricSpace& space,
                     const std::string& path);
void save_cloud_csv(const core::FiniteMetricSpace& space,
                    const std::string& path);

nlohmann::json smooth_map_to_json(const smooth::SmoothMap& m);
smooth::SmoothMap smooth_map_from_json(const nlohmann::json& j);

nlohmann::json atlas_to_json(const atlas::GluingAtlas& a);

// Reconstructs the Euclidean side (transitions, domains) from the file and
// re-derives charts from the space; probe evaluations reproduce to 1e-12.
atlas::GluingAtlas atlas_from_json(const nlohmann::json& j,
                                   const core::FiniteMetricSpace& space);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace reifenberg::io
