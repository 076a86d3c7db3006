#include <random>

#include <gtest/gtest.h>

#include "mrig/errors.hpp"
#include "mrig/frame_pose_init.hpp"
#include "mrig/pipeline.hpp"
#include "mrig/scene_synth.hpp"
#include "test_util.hpp"

using namespace mrig;
using mrig::testing::axis_rotation;
using mrig::testing::random_transform;

namespace {

StructureEstimate identity_structure(std::initializer_list<int> ids) {
  StructureEstimate s;
  s.reference = *ids.begin();
  for (int id : ids) s.poses[id] = RigidTransform::identity();
  return s;
}

CandidateSet single(const RigidTransform& t) {
  CandidateSet s;
  s.transforms = {t};
  s.ratio = 10.0;
  return s;
}

}  // namespace

TEST(FrameCandidates, ReferenceChainCollapses) {
  std::mt19937_64 rng(1);
  const RigidTransform t = random_transform(rng);
  CandidateTable table;
  table[{0, 0, 0}] = single(t);
  const auto c = frame_candidates(0, table, identity_structure({0}), identity_structure({0}));
  ASSERT_EQ(c.candidates.size(), 1u);
  EXPECT_EQ(max_abs_diff(c.candidates[0].transform, t), 0.0);
  EXPECT_EQ(c.candidates[0].cam, 0);
  EXPECT_EQ(c.candidates[0].marker, 0);
}

TEST(FrameCandidates, CountsAndChain) {
  std::mt19937_64 rng(2);
  StructureEstimate cams = identity_structure({0, 1, 2});
  StructureEstimate markers = identity_structure({0, 1});
  for (auto& [id, p] : cams.poses) if (id) p = random_transform(rng);
  markers.poses[1] = random_transform(rng, 0.05);
  const RigidTransform g = random_transform(rng);

  CandidateTable table;
  for (int c = 0; c < 3; ++c) {
    for (int m = 0; m < 2; ++m) {
      // T = C_c^-1 * G * M_m
      table[{4, c, m}] = single(cams.poses[c].inverse() * g * markers.poses[m]);
    }
  }
  // Other frames must not leak in.
  table[{5, 0, 0}] = single(RigidTransform::identity());

  const auto pi = frame_candidates(4, table, cams, markers);
  ASSERT_EQ(pi.candidates.size(), 6u);
  for (const auto& cand : pi.candidates) EXPECT_LT(max_abs_diff(cand.transform, g), 1e-12);

  // Ambiguous detections contribute both transforms.
  table[{4, 1, 1}].transforms.push_back(RigidTransform::identity());
  EXPECT_EQ(frame_candidates(4, table, cams, markers).candidates.size(), 7u);
  EXPECT_TRUE(frame_candidates(9, table, cams, markers).candidates.empty());

  // Unknown bridges are skipped.
  table[{4, 7, 0}] = single(g);
  EXPECT_EQ(frame_candidates(4, table, cams, markers).candidates.size(), 7u);
}

TEST(SelectFramePose, Examples) {
  const ProbeFrame probes = make_probe_frame(0.04);
  FramePoseCandidates pi;
  EXPECT_THROW(select_frame_pose(pi, probes), NoDetectionsInFrame);

  std::mt19937_64 rng(3);
  const RigidTransform g = random_transform(rng);
  pi.candidates.push_back({g});
  EXPECT_EQ(max_abs_diff(select_frame_pose(pi, probes), g), 0.0);

  const RigidTransform outlier(axis_rotation(Vec3(0, 1, 0), 2.0) * g.rotation, g.translation);
  pi.candidates = {{outlier}, {g}, {g}};
  EXPECT_EQ(max_abs_diff(select_frame_pose(pi, probes), g), 0.0);
}

TEST(SelectFramePose, MatchesBruteForce) {
  const ProbeFrame probes = make_probe_frame(0.04);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    FramePoseCandidates pi;
    for (int i = 0; i < 20; ++i) pi.candidates.push_back({random_transform(rng, 0.1)});
    std::size_t best = 0;
    double best_score = 0.0;
    for (std::size_t k = 0; k < pi.candidates.size(); ++k) {
      double score = 0.0;
      for (const auto& other : pi.candidates) {
        const Mat4 d = pi.candidates[k].transform.matrix() - other.transform.matrix();
        for (int axis = 0; axis < 3; ++axis) {
          Eigen::Vector4d p = Eigen::Vector4d::UnitW();
          p[axis] = 0.04;
          score += (d * p).squaredNorm();
        }
      }
      if (k == 0 || score < best_score) {
        best = k;
        best_score = score;
      }
    }
    EXPECT_EQ(max_abs_diff(select_frame_pose(pi, probes), pi.candidates[best].transform), 0.0);
  }
}

TEST(BuildTrajectory, EmptyInputs) {
  const ProbeFrame probes = make_probe_frame(0.04);
  const auto s = identity_structure({0});
  EXPECT_TRUE(build_trajectory(0, {}, s, s, probes).frames.empty());

  std::mt19937_64 rng(5);
  CandidateTable table;
  table[{0, 0, 0}] = single(random_transform(rng));
  table[{2, 0, 0}] = single(random_transform(rng));
  const Trajectory traj = build_trajectory(3, table, s, s, probes);
  ASSERT_EQ(traj.frames.size(), 3u);
  EXPECT_TRUE(traj.frames.at(0).tracked());
  EXPECT_FALSE(traj.frames.at(1).tracked());
  EXPECT_TRUE(traj.frames.at(2).tracked());
  EXPECT_EQ(traj.frames.at(0).source, PoseSource::Init);
}

TEST(BuildTrajectory, ZeroNoiseSequenceMatchesGroundTruth) {
  SceneSpec spec;
  spec.n_frames = 200;
  const SyntheticScene scene = generate(spec);
  const ProbeFrame probes = make_probe_frame(spec.marker_side);
  const CandidateTable table = build_candidate_table(scene.dataset, kDefaultTauRatio);
  const Trajectory traj =
      build_trajectory(spec.n_frames, table, scene.gt.cams_gt, scene.gt.markers_gt, probes);
  int tracked = 0;
  for (const auto& [t, f] : traj.frames) {
    if (!f.tracked()) continue;
    ++tracked;
    const RigidTransform& truth = *scene.gt.traj_gt.frames.at(t).pose;
    EXPECT_LT(rotation_angle_between(*f.pose, truth), 1e-5) << t;
    EXPECT_LT((f.pose->translation - truth.translation).norm(), 1e-5) << t;
  }
  EXPECT_EQ(tracked, spec.n_frames);
}
