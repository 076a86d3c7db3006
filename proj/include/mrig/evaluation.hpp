#pragma once

#include <span>
#include <vector>

#include "mrig/dataset.hpp"
#include "mrig/geometry.hpp"
#include "mrig/scene_synth.hpp"

namespace mrig {

struct HornResult {
  RigidTransform transform;  // maps estimate coordinates into ground-truth coordinates
  double scale = 1.0;
  double rms = 0.0;  // residual after alignment, same unit as the input
};

/// Closed-form least-squares alignment (unit-quaternion solution) of `est`
/// onto `gt`. Throws DegenerateConfiguration for fewer than three points or
/// collinear/coincident points.
HornResult align_horn(std::span<const Vec3> est, std::span<const Vec3> gt,
                      bool with_scale = false);

/// Aligns two pose sequences through their origins and axis points at
/// distance `probe_scale`.
HornResult align_horn_poses(std::span<const RigidTransform> est,
                            std::span<const RigidTransform> gt, double probe_scale,
                            bool with_scale = false);

struct ErrorReport {
  double obj_trans_err = 0.0;      // mm, mean over frames
  double obj_rot_err = 0.0;        // deg, mean over frames
  double cam_trans_err = 0.0;      // mm, mean over cameras
  double marker_config_err = 0.0;  // mm, mean over marker corners
  std::size_t frames = 0;
};

/// Errors of an estimate against ground truth after rigid alignment.
/// Throws FrameMismatch when the estimate has a frame, camera or marker the
/// ground truth lacks.
ErrorReport evaluate(const CalibrationResult& result, const GroundTruth& gt);

}  // namespace mrig
