#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "mrig/errors.hpp"
#include "mrig/evaluation.hpp"
#include "mrig/io.hpp"
#include "mrig/pipeline.hpp"
#include "mrig/scene_synth.hpp"
#include "test_util.hpp"

using namespace mrig;
using mrig::testing::random_transform;

namespace {

CalibrationResult from_truth(const GroundTruth& gt) {
  CalibrationResult r;
  r.marker_side = gt.marker_side;
  r.cams = gt.cams_gt;
  r.markers = gt.markers_gt;
  r.traj = gt.traj_gt;
  return r;
}

std::vector<Vec3> random_cloud(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  return pts;
}

}  // namespace

TEST(SceneSpecTest, ValidationRejectsBadFields) {
  SceneSpec ok;
  EXPECT_NO_THROW(ok.validate());
  SceneSpec s = ok;
  s.n_cameras = 0;
  EXPECT_THROW(generate(s), InvalidSpec);
  s = ok;
  s.circle_radius = -1.0;
  EXPECT_THROW(generate(s), InvalidSpec);
  s = ok;
  s.marker_side = 0.0;
  EXPECT_THROW(generate(s), InvalidSpec);
  s = ok;
  s.object = ObjectKind::Explicit;
  EXPECT_THROW(generate(s), InvalidSpec);
}

TEST(Generate, DefaultsGiveFiveCameraCube) {
  SceneSpec spec;
  spec.n_frames = 10;
  const SyntheticScene s = generate(spec);
  EXPECT_EQ(s.gt.cams_gt.poses.size(), 5u);
  EXPECT_EQ(s.gt.markers_gt.poses.size(), 4u);
  EXPECT_EQ(s.dataset.n_frames, 10);
  EXPECT_EQ(s.dataset.intrinsics.size(), 5u);
  EXPECT_EQ(max_abs_diff(s.gt.cams_gt.poses.at(0), RigidTransform::identity()), 0.0);
  EXPECT_EQ(max_abs_diff(s.gt.markers_gt.poses.at(0), RigidTransform::identity()), 0.0);
  // Cameras lie on the circle (equal distances from the first camera's neighbours).
  const Vec3 c1 = s.gt.cams_gt.poses.at(1).translation;
  const Vec3 c4 = s.gt.cams_gt.poses.at(4).translation;
  EXPECT_NEAR(c1.norm(), c4.norm(), 1e-12);
  EXPECT_NO_THROW(s.dataset.validate());
}

TEST(Generate, SingleCameraSeesExactlyFacingMarkers) {
  for (const ObjectKind kind : {ObjectKind::Cube, ObjectKind::Pentagon}) {
    SceneSpec spec;
    spec.n_cameras = 1;
    spec.n_frames = 1;
    spec.object = kind;
    spec.trajectory = TrajectoryProfile::StaticPlacements;
    const SyntheticScene s = generate(spec);
    const RigidTransform& g = *s.gt.traj_gt.frames.at(0).pose;
    std::set<int> expected;
    for (const auto& [id, m] : s.gt.markers_gt.poses) {
      const RigidTransform cam_from_marker = g * m;
      const Vec3 to_camera = -cam_from_marker.translation.normalized();
      if (cam_from_marker.rotation.col(2).dot(to_camera) > kMinFacingCosine) expected.insert(id);
    }
    std::set<int> seen;
    for (const auto& d : s.dataset.detections) seen.insert(d.marker);
    EXPECT_EQ(seen, expected) << to_string(kind);
    EXPECT_FALSE(seen.empty());
    EXPECT_LT(seen.size(), s.gt.markers_gt.poses.size());
  }
}

TEST(Generate, DeterministicUnderSeed) {
  SceneSpec spec;
  spec.n_frames = 30;
  spec.noise_sigma = 0.4;
  spec.seed = 42;
  const SyntheticScene a = generate(spec), b = generate(spec);
  EXPECT_EQ(io::format_detections(a.dataset.detections), io::format_detections(b.dataset.detections));
  EXPECT_EQ(io::format_ground_truth(a.gt), io::format_ground_truth(b.gt));
  spec.seed = 43;
  EXPECT_NE(io::format_detections(generate(spec).dataset.detections),
            io::format_detections(a.dataset.detections));
}

TEST(Generate, RegeneratingFromGroundTruthIsBitExact) {
  SceneSpec spec;
  spec.n_frames = 25;
  const SyntheticScene s = generate(spec);
  const auto again = render_detections(s.gt, s.dataset.intrinsics, 0.0, spec.seed);
  ASSERT_EQ(again.size(), s.dataset.detections.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    for (std::size_t l = 0; l < 4; ++l) {
      EXPECT_EQ(again[i].corners[l], s.dataset.detections[i].corners[l]);
    }
  }
  // The written ground truth reproduces the same detections too.
  const GroundTruth parsed = io::parse_ground_truth(io::format_ground_truth(s.gt));
  EXPECT_EQ(io::format_detections(render_detections(parsed, s.dataset.intrinsics, 0.0, spec.seed)),
            io::format_detections(s.dataset.detections));
}

TEST(Generate, AllProfilesAndObjectsProduceData) {
  for (const auto profile :
       {TrajectoryProfile::Orbit, TrajectoryProfile::StaticPlacements, TrajectoryProfile::FastMotion}) {
    for (const auto object : {ObjectKind::Cube, ObjectKind::Pentagon, ObjectKind::FlatGrid}) {
      SceneSpec spec;
      spec.n_frames = 40;
      spec.trajectory = profile;
      spec.object = object;
      const SyntheticScene s = generate(spec);
      EXPECT_GT(s.dataset.detections.size(), 40u) << to_string(profile) << "/" << to_string(object);
      EXPECT_EQ(trajectory_profile_from_string(to_string(profile)), profile);
      EXPECT_EQ(object_kind_from_string(to_string(object)), object);
    }
  }
  SceneSpec spec;
  spec.object = ObjectKind::Explicit;
  spec.explicit_markers = {RigidTransform::identity(),
                           RigidTransform::from_translation(Vec3(0.06, 0, 0))};
  spec.n_frames = 5;
  EXPECT_EQ(generate(spec).gt.markers_gt.poses.size(), 2u);
}

TEST(Horn, IdentityAndConstructedTransform) {
  std::mt19937_64 rng(7);
  const auto gt = random_cloud(rng, 20);
  const HornResult same = align_horn(gt, gt);
  EXPECT_LT(max_abs_diff(same.transform, RigidTransform::identity()), 1e-12);
  EXPECT_LT(same.rms, 1e-12);

  for (int k = 0; k < 20; ++k) {
    const RigidTransform x = random_transform(rng, 2.0);
    std::vector<Vec3> est;
    for (const auto& p : gt) est.push_back(x * p);
    const HornResult h = align_horn(est, gt);
    EXPECT_LT(max_abs_diff(h.transform, x.inverse()), 1e-9);
    EXPECT_LT(h.rms, 1e-9);
    EXPECT_DOUBLE_EQ(h.scale, 1.0);
  }
}

TEST(Horn, NoiseResidualMatchesSigma) {
  std::mt19937_64 rng(8);
  const auto gt = random_cloud(rng, 2000);
  // Per-axis sigma chosen so the 3D displacement has an rms of 1 mm.
  std::normal_distribution<double> n(0.0, 0.001 / std::sqrt(3.0));
  const RigidTransform x = random_transform(rng);
  std::vector<Vec3> est;
  for (const auto& p : gt) est.push_back(x * p + Vec3(n(rng), n(rng), n(rng)));
  const HornResult h = align_horn(est, gt);
  EXPECT_NEAR(h.rms, 0.001, 0.0002);
}

TEST(Horn, SimilarityRecoversScale) {
  std::mt19937_64 rng(9);
  const auto gt = random_cloud(rng, 15);
  const RigidTransform x = random_transform(rng);
  std::vector<Vec3> est;
  for (const auto& p : gt) est.push_back(x * (2.5 * p));
  const HornResult h = align_horn(est, gt, true);
  EXPECT_NEAR(h.scale, 1.0 / 2.5, 1e-9);
  EXPECT_LT(h.rms, 1e-9);
}

TEST(Horn, DegenerateInputsThrow) {
  const std::vector<Vec3> two{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  EXPECT_THROW(align_horn(two, two), DegenerateConfiguration);
  const std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(2, 2, 2), Vec3(-3, -3, -3)};
  EXPECT_THROW(align_horn(line, line), DegenerateConfiguration);
  const std::vector<Vec3> same(5, Vec3(1, 2, 3));
  EXPECT_THROW(align_horn(same, same), DegenerateConfiguration);
  const std::vector<Vec3> three{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  EXPECT_THROW(align_horn(three, two), DegenerateConfiguration);
  EXPECT_NO_THROW(align_horn(three, three));
}

TEST(Horn, PoseSequences) {
  std::mt19937_64 rng(12);
  std::vector<RigidTransform> gt, est;
  const RigidTransform x = random_transform(rng);
  for (int i = 0; i < 3; ++i) gt.push_back(random_transform(rng, 0.3));
  for (const auto& p : gt) est.push_back(x * p);
  const HornResult h = align_horn_poses(est, gt, 0.04);
  EXPECT_LT(max_abs_diff(h.transform, x.inverse()), 1e-9);
  // A single pose is still well-posed through its axis points.
  const HornResult one = align_horn_poses(std::span(est).first(1), std::span(gt).first(1), 0.04);
  EXPECT_LT(max_abs_diff(one.transform, x.inverse()), 1e-9);
}

TEST(Evaluate, TruthScoresZero) {
  SceneSpec spec;
  spec.n_frames = 30;
  const SyntheticScene s = generate(spec);
  const ErrorReport e = evaluate(from_truth(s.gt), s.gt);
  EXPECT_LT(e.obj_trans_err, 1e-9);
  EXPECT_LT(e.obj_rot_err, 1e-9);
  EXPECT_LT(e.cam_trans_err, 1e-9);
  EXPECT_LT(e.marker_config_err, 1e-9);
  EXPECT_EQ(e.frames, 30u);
}

TEST(Evaluate, GlobalOffsetIsAbsorbed) {
  SceneSpec spec;
  spec.n_frames = 30;
  spec.noise_sigma = 0.3;
  const SyntheticScene s = generate(spec);
  const CalibrationRun run = calibrate(s.dataset, {});
  const ErrorReport base = evaluate(run.result, s.gt);

  CalibrationResult shifted = run.result;
  for (auto& [t, f] : shifted.traj.frames) {
    if (f.pose) f.pose = RigidTransform::from_translation(Vec3(0.3, -0.2, 0.1)) * *f.pose;
  }
  EXPECT_NEAR(evaluate(shifted, s.gt).obj_trans_err, base.obj_trans_err, 1e-9);

  CalibrationResult exact = from_truth(s.gt);
  for (auto& [t, f] : exact.traj.frames) f.pose = RigidTransform::from_translation(Vec3(1, 2, 3)) * *f.pose;
  EXPECT_LT(evaluate(exact, s.gt).obj_trans_err, 1e-9);

  // Re-expressing the ground truth in another frame changes nothing.
  std::mt19937_64 rng(13);
  const RigidTransform x = random_transform(rng);
  GroundTruth moved = s.gt;
  for (auto& [id, p] : moved.cams_gt.poses) p = x * p;
  for (auto& [t, f] : moved.traj_gt.frames) f.pose = x * *f.pose;
  const ErrorReport re = evaluate(run.result, moved);
  EXPECT_NEAR(re.obj_trans_err, base.obj_trans_err, 1e-9);
  EXPECT_NEAR(re.obj_rot_err, base.obj_rot_err, 1e-9);
  EXPECT_NEAR(re.cam_trans_err, base.cam_trans_err, 1e-9);
  EXPECT_NEAR(re.marker_config_err, base.marker_config_err, 1e-9);
}

TEST(Evaluate, MismatchedIdsThrow) {
  SceneSpec spec;
  spec.n_frames = 5;
  const SyntheticScene s = generate(spec);
  CalibrationResult r = from_truth(s.gt);
  r.traj.frames[99].pose = RigidTransform::identity();
  EXPECT_THROW(evaluate(r, s.gt), FrameMismatch);
  r = from_truth(s.gt);
  r.cams.poses[17] = RigidTransform::identity();
  EXPECT_THROW(evaluate(r, s.gt), FrameMismatch);
  r = from_truth(s.gt);
  r.markers.poses[17] = RigidTransform::identity();
  EXPECT_THROW(evaluate(r, s.gt), FrameMismatch);
}

TEST(Evaluate, ZeroNoiseEndToEnd) {
  SceneSpec spec;
  spec.n_frames = 40;
  const SyntheticScene s = generate(spec);
  const ErrorReport e = evaluate(calibrate(s.dataset, {}).result, s.gt);
  // 1e-6 m expressed in mm.
  EXPECT_LT(e.obj_trans_err, 1e-3);
  EXPECT_LT(e.cam_trans_err, 1e-3);
  EXPECT_LT(e.marker_config_err, 1e-3);
  EXPECT_LT(e.obj_rot_err, 1e-6 * 180.0 / 3.141592653589793);
}

TEST(Evaluate, ErrorGrowsWithNoiseOnAverage) {
  double low = 0.0, high = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SceneSpec spec;
    spec.n_frames = 40;
    spec.circle_radius = 0.7;
    spec.seed = seed;
    spec.noise_sigma = 0.2;
    low += evaluate(calibrate(generate(spec).dataset, {}).result, generate(spec).gt).obj_trans_err;
    spec.noise_sigma = 0.4;
    high += evaluate(calibrate(generate(spec).dataset, {}).result, generate(spec).gt).obj_trans_err;
  }
  EXPECT_GE(high, low);
}

TEST(GroundTruthTest, RestrictedToCameras) {
  SceneSpec spec;
  spec.n_frames = 10;
  const SyntheticScene s = generate(spec);
  const GroundTruth r = s.gt.restricted_to_cameras({4, 2, 3});
  EXPECT_EQ(r.cams_gt.reference, 2);
  EXPECT_EQ(r.cams_gt.poses.size(), 3u);
  EXPECT_EQ(max_abs_diff(r.cams_gt.poses.at(2), RigidTransform::identity()), 0.0);
  for (int c : {2, 3, 4}) {
    for (const auto& [t, f] : s.gt.traj_gt.frames) {
      const RigidTransform before = s.gt.cams_gt.poses.at(c).inverse() * *f.pose;
      const RigidTransform after = r.cams_gt.poses.at(c).inverse() * *r.traj_gt.frames.at(t).pose;
      EXPECT_LT(max_abs_diff(before, after), 1e-12);
    }
  }
  EXPECT_THROW(s.gt.restricted_to_cameras({}), InvalidSpec);

  const Dataset d = restrict_cameras(s.dataset, {2, 3, 4});
  for (const auto& det : d.detections) EXPECT_GE(det.cam, 2);
  EXPECT_EQ(d.intrinsics.size(), 3u);
}
