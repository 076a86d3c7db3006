#include "mrig/scene_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mrig/errors.hpp"

namespace mrig {

namespace {

constexpr double kPi = std::numbers::pi;

Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

// Camera -> world for a camera at `pos` looking at `target`, z up, image y down.
RigidTransform look_at(const Vec3& pos, const Vec3& target) {
  const Vec3 z = (target - pos).normalized();
  const Vec3 x = z.cross(Vec3::UnitZ()).normalized();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return {r, pos};
}

// Marker facing outward along the horizontal direction `azimuth`, centred at
// distance `apothem` from the object axis, upright.
RigidTransform lateral_marker(double azimuth, double apothem) {
  const Vec3 n(std::cos(azimuth), std::sin(azimuth), 0.0);
  const Vec3 y(0.0, 0.0, -1.0);
  Mat3 r;
  r.col(0) = y.cross(n);
  r.col(1) = y;
  r.col(2) = n;
  return {r, apothem * n};
}

std::vector<RigidTransform> object_markers(const SceneSpec& spec) {
  std::vector<RigidTransform> out;
  switch (spec.object) {
    case ObjectKind::Cube:
      for (int k = 0; k < 4; ++k) out.push_back(lateral_marker(k * kPi / 2.0, spec.object_size / 2.0));
      break;
    case ObjectKind::Pentagon:
      for (int k = 0; k < 5; ++k) {
        out.push_back(lateral_marker(k * 2.0 * kPi / 5.0, spec.object_size / 2.0));
      }
      break;
    case ObjectKind::FlatGrid: {
      // 2 x 2 grid facing object +x so it behaves like a lateral face.
      const double h = spec.object_size / 2.0;
      for (int row = 0; row < 2; ++row) {
        for (int col = 0; col < 2; ++col) {
          RigidTransform m = lateral_marker(0.0, 0.0);
          m.translation = Vec3(0.0, col == 0 ? -h : h, row == 0 ? h : -h);
          out.push_back(m);
        }
      }
      break;
    }
    case ObjectKind::Explicit:
      out = spec.explicit_markers;
      break;
  }
  return out;
}

// Object -> world at frame t.
RigidTransform object_pose(const SceneSpec& spec, int t, const std::vector<RigidTransform>& cams_world) {
  const double phase = 2.0 * kPi * t / std::max(1, spec.n_frames);
  if (spec.ambiguity_stress && (t / 10) % 2 == 0) {
    // Marker 0 turned squarely towards one camera; the camera changes every
    // stressed segment.
    const int cam = (t / 20) % static_cast<int>(cams_world.size());
    const Vec3 centre(0.01 * std::cos(phase), 0.01 * std::sin(phase), 0.0);
    const Vec3 to_cam = cams_world[cam].translation - centre;
    const double az = std::atan2(to_cam.y(), to_cam.x());
    const double el = std::atan2(to_cam.z(), to_cam.head<2>().norm());
    return {rot_z(az) * rot_y(-el), centre};
  }
  switch (spec.trajectory) {
    case TrajectoryProfile::StaticPlacements: {
      const int block = std::min(3, 4 * t / std::max(1, spec.n_frames));
      const Vec3 offsets[4] = {Vec3(0.04, 0.03, 0.0), Vec3(-0.03, 0.04, 0.02),
                               Vec3(-0.04, -0.03, -0.01), Vec3(0.03, -0.04, 0.01)};
      const Mat3 r = rot_z(block * kPi / 2.0 + 0.3) * rot_y(0.1 * (block % 2 ? 1 : -1)) *
                     rot_x(0.08 * (block - 1.5));
      return {r, offsets[block]};
    }
    case TrajectoryProfile::FastMotion: {
      const Vec3 c(0.05 * std::cos(phase), 0.04 * std::sin(2.0 * phase), 0.03 * std::sin(3.0 * phase));
      const double yaw = 2.0 * phase + 0.8 * std::sin(20.0 * phase);
      return {rot_z(yaw) * rot_y(0.3 * std::sin(7.0 * phase)) * rot_x(0.25 * std::cos(5.0 * phase)), c};
    }
    case TrajectoryProfile::Orbit:
    default: {
      const Vec3 c(0.05 * std::cos(phase), 0.025 * std::sin(2.0 * phase), 0.03 * std::sin(3.0 * phase));
      const double yaw = 2.0 * phase;
      return {rot_z(yaw) * rot_y(0.25 * std::sin(3.0 * phase)) * rot_x(0.2 * std::cos(2.0 * phase)), c};
    }
  }
}

}  // namespace

std::string to_string(ObjectKind k) {
  switch (k) {
    case ObjectKind::Cube: return "cube";
    case ObjectKind::Pentagon: return "pentagon";
    case ObjectKind::FlatGrid: return "flat-grid";
    case ObjectKind::Explicit: return "explicit";
  }
  return "cube";
}

std::string to_string(TrajectoryProfile p) {
  switch (p) {
    case TrajectoryProfile::Orbit: return "orbit";
    case TrajectoryProfile::StaticPlacements: return "static-placements";
    case TrajectoryProfile::FastMotion: return "fast-motion";
  }
  return "orbit";
}

ObjectKind object_kind_from_string(const std::string& s) {
  if (s == "cube") return ObjectKind::Cube;
  if (s == "pentagon") return ObjectKind::Pentagon;
  if (s == "flat-grid") return ObjectKind::FlatGrid;
  if (s == "explicit") return ObjectKind::Explicit;
  throw InvalidSpec("unknown object kind '" + s + "'");
}

TrajectoryProfile trajectory_profile_from_string(const std::string& s) {
  if (s == "orbit") return TrajectoryProfile::Orbit;
  if (s == "static-placements") return TrajectoryProfile::StaticPlacements;
  if (s == "fast-motion") return TrajectoryProfile::FastMotion;
  throw InvalidSpec("unknown trajectory profile '" + s + "'");
}

CameraIntrinsics default_intrinsics() {
  CameraIntrinsics intr;
  intr.fx = intr.fy = 600.0;
  intr.cx = 320.0;
  intr.cy = 240.0;
  intr.width = 640;
  intr.height = 480;
  return intr;
}

void SceneSpec::validate() const {
  if (n_cameras < 1) throw InvalidSpec("n_cameras must be >= 1");
  if (!(circle_radius > 0.0)) throw InvalidSpec("circle_radius must be positive");
  if (!(marker_side > 0.0)) throw InvalidSpec("marker_side must be positive");
  if (n_frames < 0) throw InvalidSpec("n_frames must be >= 0");
  if (!(noise_sigma >= 0.0)) throw InvalidSpec("noise_sigma must be >= 0");
  if (object == ObjectKind::Explicit && explicit_markers.empty()) {
    throw InvalidSpec("explicit object needs at least one marker pose");
  }
  if (object != ObjectKind::Explicit && !(object_size > 0.0)) {
    throw InvalidSpec("object_size must be positive");
  }
  try {
    intrinsics.validate();
  } catch (const std::invalid_argument& e) {
    throw InvalidSpec(e.what());
  }
}

GroundTruth GroundTruth::restricted_to_cameras(const std::vector<int>& cams) const {
  if (cams.empty()) throw InvalidSpec("camera subset is empty");
  GroundTruth out = *this;
  const int ref = *std::min_element(cams.begin(), cams.end());
  const RigidTransform ref_inv = cams_gt.poses.at(ref).inverse();
  out.cams_gt.reference = ref;
  out.cams_gt.poses.clear();
  out.cams_gt.tree_edges.clear();
  for (int c : cams) out.cams_gt.poses[c] = ref_inv * cams_gt.poses.at(c);
  out.cams_gt.poses[ref] = RigidTransform::identity();
  for (auto& [t, fp] : out.traj_gt.frames) {
    if (fp.pose) fp.pose = ref_inv * *fp.pose;
  }
  return out;
}

std::vector<Detection> render_detections(const GroundTruth& gt,
                                         const std::map<int, CameraIntrinsics>& intrinsics,
                                         double noise_sigma, std::uint64_t seed) {
  const MarkerTemplate tmpl(gt.marker_side);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
  std::vector<Detection> out;
  for (const auto& [t, fp] : gt.traj_gt.frames) {
    if (!fp.pose) continue;
    for (const auto& [cam, cam_pose] : gt.cams_gt.poses) {
      const CameraIntrinsics& intr = intrinsics.at(cam);
      const RigidTransform cam_from_ref = cam_pose.inverse() * *fp.pose;
      for (const auto& [marker, marker_pose] : gt.markers_gt.poses) {
        const RigidTransform cam_from_marker = cam_from_ref * marker_pose;
        const Vec3 centre = cam_from_marker.translation;
        if (!(centre.z() > kMinDepth)) continue;
        const Vec3 normal = cam_from_marker.rotation.col(2);
        if (normal.dot(-centre.normalized()) <= kMinFacingCosine) continue;
        Detection d{t, cam, marker, {}};
        bool inside = true;
        for (std::size_t l = 0; l < 4 && inside; ++l) {
          Vec2 px;
          if (!project_with_jacobian(cam_from_marker * tmpl.corners[l], intr, px, nullptr)) {
            inside = false;
            break;
          }
          inside = px.x() >= 0.0 && px.y() >= 0.0 && px.x() <= intr.width && px.y() <= intr.height;
          d.corners[l] = px;
        }
        if (!inside) continue;
        if (noise_sigma > 0.0) {
          for (auto& c : d.corners) {
            c.x() += noise(rng);
            c.y() += noise(rng);
          }
        }
        out.push_back(d);
      }
    }
  }
  return out;
}

SyntheticScene generate(const SceneSpec& spec) {
  spec.validate();

  std::vector<RigidTransform> cams_world;
  for (int c = 0; c < spec.n_cameras; ++c) {
    const double a = 2.0 * kPi * c / spec.n_cameras;
    const Vec3 pos(spec.circle_radius * std::cos(a), spec.circle_radius * std::sin(a),
                   spec.camera_height);
    cams_world.push_back(look_at(pos, Vec3::Zero()));
  }
  const std::vector<RigidTransform> markers_obj = object_markers(spec);

  SyntheticScene scene;
  GroundTruth& gt = scene.gt;
  gt.marker_side = spec.marker_side;
  const RigidTransform ref_cam_inv = cams_world[0].inverse();
  gt.cams_gt.reference = 0;
  for (int c = 0; c < spec.n_cameras; ++c) gt.cams_gt.poses[c] = ref_cam_inv * cams_world[c];
  gt.cams_gt.poses[0] = RigidTransform::identity();

  const RigidTransform ref_marker_inv = markers_obj[0].inverse();
  gt.markers_gt.reference = 0;
  for (std::size_t m = 0; m < markers_obj.size(); ++m) {
    gt.markers_gt.poses[static_cast<int>(m)] = ref_marker_inv * markers_obj[m];
  }
  gt.markers_gt.poses[0] = RigidTransform::identity();

  for (int t = 0; t < spec.n_frames; ++t) {
    FramePose fp;
    fp.pose = ref_cam_inv * object_pose(spec, t, cams_world) * markers_obj[0];
    gt.traj_gt.frames[t] = fp;
  }

  Dataset& data = scene.dataset;
  for (int c = 0; c < spec.n_cameras; ++c) data.intrinsics[c] = spec.intrinsics;
  data.marker_side = spec.marker_side;
  data.n_frames = spec.n_frames;
  data.detections = render_detections(gt, data.intrinsics, spec.noise_sigma, spec.seed);
  return scene;
}

Dataset restrict_cameras(const Dataset& data, const std::vector<int>& cams) {
  Dataset out;
  out.marker_side = data.marker_side;
  out.n_frames = data.n_frames;
  for (int c : cams) {
    auto it = data.intrinsics.find(c);
    if (it != data.intrinsics.end()) out.intrinsics[c] = it->second;
  }
  for (const auto& d : data.detections) {
    if (std::find(cams.begin(), cams.end(), d.cam) != cams.end()) out.detections.push_back(d);
  }
  return out;
}

}  // namespace mrig
