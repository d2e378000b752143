#pragma once

#include "patopa/estimators.hpp"
#include "patopa/features.hpp"
#include "patopa/grid_model.hpp"
#include "patopa/scenario.hpp"

#include <filesystem>
#include <string>

namespace patopa {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Feeder definition: true topology plus line parameters.
struct Feeder {
  GridTopology topology;
  LineParams params;
};

/// Reads {"n_bus", "edges", "g", "b"} JSON. An optional "index_base": 1 marks
/// one-based bus labels, which are shifted to zero-based on load.
/// Throws ParseError / IoError.
Feeder load_feeder(const std::filesystem::path& path);
Feeder parse_feeder(const std::string& json_text);
void save_feeder(const std::filesystem::path& path, const Feeder& feeder);

/// Long-format CSV with header `t,bus,v,theta,p,q`, one row per (t, bus).
void write_measurements_csv(const std::filesystem::path& path, const MeasurementSet& ms);
/// Rows may come in any order but must cover every (t, bus) pair exactly once.
MeasurementSet read_measurements_csv(const std::filesystem::path& path);

/// Debug dump of X, y and W as `row,col,x,w` for nonzero X plus y entries
/// (col = 2m).
void write_features_csv(const std::filesystem::path& path, const FeatureSystem& fs);

/// `iteration,log_likelihood,condition_number`.
void write_trace_csv(const std::filesystem::path& path, const EstimationResult& result);

}  // namespace patopa
