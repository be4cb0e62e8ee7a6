#pragma once

#include <string>

#include "scpsfm/eval.hpp"
#include "scpsfm/solver.hpp"
#include "scpsfm/synthgen.hpp"

namespace scpsfm {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- track files: CSV `view,track,x,y[,w]`, one row per observation ---
CorrespondenceTracks load_tracks_csv(const std::string& path);
void save_tracks_csv(const std::string& path, const CorrespondenceTracks& tracks);

// --- measurement matrix: raw entries CSV + JSON sidecar {n,m,row_valid,col_valid} ---
void save_measurement_matrix(const std::string& csv_path,
                             const std::string& sidecar_path,
                             const MeasurementMatrix& M);
MeasurementMatrix load_measurement_matrix(const std::string& csv_path,
                                          const std::string& sidecar_path);

// --- calibration JSON {K, n_inf, frame} ---
std::string calibration_to_json(const CalibrationEstimate& c);
CalibrationEstimate calibration_from_json(const std::string& text);

// --- solver config: JSON, or a flat `key = value` TOML subset ---
SolverConfig solver_config_from_json(const std::string& text);
SolverConfig solver_config_from_toml(const std::string& text);
SolverConfig load_solver_config(const std::string& path);  // by extension
std::string solver_config_to_json(const SolverConfig& cfg);

// --- results ---
std::string solve_result_to_json(const SolveResult& res);
void save_loss_trace_csv(const std::string& path,
                         const std::vector<std::array<double, 3>>& trace);

// --- scene bundles: directory with config.json, tracks.csv, matrices ---
void save_scene_bundle(const std::string& dir, const SyntheticInstance& inst);
SyntheticInstance load_scene_bundle(const std::string& dir);

// --- minimal SVG line chart; one polyline per series ---
void write_svg_lines(const std::string& path, const std::string& title,
                     const std::vector<std::string>& series_names,
                     const std::vector<std::vector<double>>& xs,
                     const std::vector<std::vector<double>>& ys);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace scpsfm
