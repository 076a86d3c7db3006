#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mrig/dataset.hpp"
#include "mrig/geometry.hpp"
#include "mrig/structure_init.hpp"

namespace mrig {

enum class ObjectKind { Cube, Pentagon, FlatGrid, Explicit };
enum class TrajectoryProfile { Orbit, StaticPlacements, FastMotion };

std::string to_string(ObjectKind k);
std::string to_string(TrajectoryProfile p);
ObjectKind object_kind_from_string(const std::string& s);
TrajectoryProfile trajectory_profile_from_string(const std::string& s);

CameraIntrinsics default_intrinsics();

/// Synthetic rig: cameras evenly spaced on a horizontal circle, all looking at
/// its centre, observing a rigid object carrying square markers.
struct SceneSpec {
  int n_cameras = 5;
  double circle_radius = 1.0;  // m
  double camera_height = 0.3;  // m above the object's nominal centre
  CameraIntrinsics intrinsics = default_intrinsics();
  ObjectKind object = ObjectKind::Cube;
  double object_size = 0.06;  // cube side, prism width across flats, or grid pitch
  std::vector<RigidTransform> explicit_markers;  // object_from_marker, ObjectKind::Explicit
  double marker_side = 0.04;                     // m
  int n_frames = 200;
  TrajectoryProfile trajectory = TrajectoryProfile::Orbit;
  double noise_sigma = 0.0;  // px
  bool ambiguity_stress = false;
  std::uint64_t seed = 1;

  /// Throws InvalidSpec.
  void validate() const;
};

struct GroundTruth {
  StructureEstimate cams_gt;     // camera -> reference camera
  StructureEstimate markers_gt;  // marker -> reference marker
  Trajectory traj_gt;            // reference marker -> reference camera, every frame
  double marker_side = 0.04;

  /// Same scene re-expressed for a camera subset, referenced to its lowest id.
  GroundTruth restricted_to_cameras(const std::vector<int>& cams) const;
};

struct SyntheticScene {
  GroundTruth gt;
  Dataset dataset;
};

/// Cosine of the 85 degree grazing limit beyond which a marker is not detected.
inline constexpr double kMinFacingCosine = 0.087;

/// Detections of every marker that is in front of the camera, faces it and
/// projects fully inside the image, with i.i.d. Gaussian corner noise.
std::vector<Detection> render_detections(const GroundTruth& gt,
                                         const std::map<int, CameraIntrinsics>& intrinsics,
                                         double noise_sigma, std::uint64_t seed);

/// Deterministic for a given spec (including seed).
SyntheticScene generate(const SceneSpec& spec);

/// Keeps only the detections and intrinsics of the listed cameras.
Dataset restrict_cameras(const Dataset& data, const std::vector<int>& cams);

}  // namespace mrig
