#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "mrig/frame_pose_init.hpp"
#include "mrig/geometry.hpp"
#include "mrig/planar_pose.hpp"
#include "mrig/structure_init.hpp"

namespace mrig {

/// Synchronized multi-camera marker detections plus camera intrinsics.
struct Dataset {
  std::vector<Detection> detections;  // sorted by (t, cam, marker)
  std::map<int, CameraIntrinsics> intrinsics;
  double marker_side = 0.04;  // meters
  int n_frames = 0;

  /// Throws MissingIntrinsics or ValidationError.
  void validate() const;
  void sort_detections();

  std::set<int> camera_ids() const;
  std::set<int> marker_ids() const;
};

struct CalibrationReport {
  double initial_rms = 0.0;  // px, per corner
  double final_rms = 0.0;
  int iterations = 0;
  std::string termination;
  std::map<int, double> frame_rms;
};

/// Camera extrinsics, marker structure and per-frame object poses.
struct CalibrationResult {
  double marker_side = 0.04;
  StructureEstimate cams;     // camera -> reference camera
  StructureEstimate markers;  // marker -> reference marker
  Trajectory traj;            // reference marker -> reference camera
  CalibrationReport report;
};

}  // namespace mrig
