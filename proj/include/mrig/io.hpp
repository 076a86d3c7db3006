#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "mrig/dataset.hpp"
#include "mrig/evaluation.hpp"
#include "mrig/scene_synth.hpp"

namespace mrig::io {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const fs::path& path, const std::string& content);

// Detections: one JSON object per line,
// {"t":int,"cam":int,"marker":int,"corners":[[x,y],[x,y],[x,y],[x,y]]}.

/// Throws ParseError naming `line_no`.
Detection parse_detection(const std::string& line, std::size_t line_no);
std::string format_detection(const Detection& d);

/// Blank lines are skipped. `line_numbers`, if given, receives the source line
/// of each returned detection.
std::vector<Detection> parse_detections(std::istream& in,
                                        std::vector<std::size_t>* line_numbers = nullptr);
std::string format_detections(const std::vector<Detection>& dets);

// Intrinsics: {"<cam id>": {fx, fy, cx, cy, dist[5], width, height, pre_undistorted}}.

std::map<int, CameraIntrinsics> parse_intrinsics(const std::string& text);
std::string format_intrinsics(const std::map<int, CameraIntrinsics>& intr);

/// Parses both files, rejects duplicate (t, cam, marker) rows naming both
/// lines, sets n_frames to the largest frame index plus one and validates.
Dataset load_dataset(const fs::path& detections, const fs::path& intrinsics,
                     double marker_side);
void save_dataset(const Dataset& data, const fs::path& detections, const fs::path& intrinsics);

std::string format_calibration(const CalibrationResult& r);
CalibrationResult parse_calibration(const std::string& text);

/// Rows `t,tx,ty,tz,qx,qy,qz,qw`; untracked frames are omitted.
std::string format_trajectory_csv(const Trajectory& traj);

std::string format_ground_truth(const GroundTruth& gt);
GroundTruth parse_ground_truth(const std::string& text);

/// Missing keys keep their defaults; unknown keys raise InvalidSpec.
SceneSpec parse_scene_spec(const std::string& text);
std::string format_scene_spec(const SceneSpec& spec);

std::string format_error_report(const ErrorReport& e);

}  // namespace mrig::io
