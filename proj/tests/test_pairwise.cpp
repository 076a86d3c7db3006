#include <algorithm>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "mrig/errors.hpp"
#include "mrig/pairwise.hpp"
#include "mrig/pipeline.hpp"
#include "mrig/scene_synth.hpp"
#include "test_util.hpp"

using namespace mrig;
using mrig::testing::random_transform;

namespace {

// Squared distance written against 4x4 homogeneous matrices.
double brute_distance(const RigidTransform& a, const RigidTransform& b, const ProbeFrame& probes) {
  const Mat4 ma = a.matrix(), mb = b.matrix();
  double d = 0.0;
  for (const auto& v : probes) {
    const Eigen::Vector4d h(v.x(), v.y(), v.z(), 1.0);
    d += (ma * h - mb * h).squaredNorm();
  }
  return d;
}

std::size_t brute_argmin(const std::vector<RigidTransform>& ts, const ProbeFrame& probes) {
  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    double score = 0.0;
    for (std::size_t s = 0; s < ts.size(); ++s) score += brute_distance(ts[k], ts[s], probes);
    if (k == 0 || score < best_score) {
      best = k;
      best_score = score;
    }
  }
  return best;
}

CandidateSet set_of(std::initializer_list<RigidTransform> ts) {
  CandidateSet s;
  s.transforms = ts;
  s.ratio = ts.size() == 2 ? 1.2 : 5.0;
  return s;
}

}  // namespace

TEST(PairKeyTest, CanonicalOrder) {
  const PairKey k = PairKey::make(5, 2, PairKind::Camera);
  EXPECT_EQ(k.a, 2);
  EXPECT_EQ(k.b, 5);
  EXPECT_THROW(PairKey::make(3, 3, PairKind::Marker), std::invalid_argument);
}

TEST(TransformDistance, Examples) {
  const ProbeFrame probes = make_probe_frame(0.04);
  std::mt19937_64 rng(1);
  const RigidTransform a = random_transform(rng);
  EXPECT_EQ(transform_distance(a, a, probes), 0.0);
  const RigidTransform shift = RigidTransform::from_translation(Vec3(0.1, 0, 0));
  EXPECT_NEAR(transform_distance(RigidTransform::identity(), shift, probes), 0.03, 1e-15);
  EXPECT_NEAR(transform_distance(RigidTransform::identity(), shift, make_probe_frame(3.0)), 0.03, 1e-15);
  for (int i = 0; i < 100; ++i) {
    const RigidTransform x = random_transform(rng), y = random_transform(rng);
    EXPECT_NEAR(transform_distance(x, y, probes), brute_distance(x, y, probes), 1e-12);
    EXPECT_DOUBLE_EQ(transform_distance(x, y, probes), transform_distance(y, x, probes));
  }
}

TEST(PairSamples, ProductCardinality) {
  const RigidTransform a = RigidTransform::from_translation(Vec3(0, 0, 1));
  const RigidTransform b = RigidTransform::from_translation(Vec3(0, 0, 2));
  EXPECT_EQ(camera_pair_samples(set_of({a}), set_of({b}), 0, 0).size(), 1u);
  EXPECT_EQ(camera_pair_samples(set_of({a, b}), set_of({b}), 0, 0).size(), 2u);
  const auto four = marker_pair_samples(set_of({a, b}), set_of({a, b}), 3, 1);
  ASSERT_EQ(four.size(), 4u);
  for (const auto& s : four) {
    EXPECT_TRUE(s.from_ambiguous);
    EXPECT_EQ(s.t, 3);
    EXPECT_EQ(s.bridge, 1);
  }
  EXPECT_TRUE(camera_pair_samples(CandidateSet{}, set_of({a}), 0, 0).empty());
  EXPECT_FALSE(camera_pair_samples(set_of({a}), set_of({b}), 0, 0)[0].from_ambiguous);
}

TEST(PairSamples, Conventions) {
  std::mt19937_64 rng(2);
  // Two cameras looking at one marker: T_i maps marker into camera i.
  const RigidTransform ti = random_transform(rng), tj = random_transform(rng);
  const auto cam = camera_pair_samples(set_of({ti}), set_of({tj}), 0, 0);
  const Vec3 p_in_j(0.1, 0.2, 0.3);
  // Camera j point -> marker -> camera i.
  EXPECT_LT((cam[0].transform * p_in_j - ti * (tj.inverse() * p_in_j)).norm(), 1e-12);
  // Marker i -> marker j through a common camera.
  const auto mk = marker_pair_samples(set_of({ti}), set_of({tj}), 0, 0);
  EXPECT_LT((mk[0].transform * p_in_j - tj.inverse() * (ti * p_in_j)).norm(), 1e-12);
}

TEST(SelectOptimal, Examples) {
  const ProbeFrame probes = make_probe_frame(0.04);
  PairAccumulator acc;
  EXPECT_THROW(select_optimal(acc, probes), EmptyCandidateSet);

  std::mt19937_64 rng(3);
  const RigidTransform x = random_transform(rng);
  acc.samples.push_back({x});
  PairSelection s = select_optimal(acc, probes);
  EXPECT_EQ(s.index, 0u);
  EXPECT_EQ(s.d_total, 0.0);

  acc.samples.clear();
  const RigidTransform outlier(mrig::testing::axis_rotation(Vec3(1, 0, 0), 2.5), Vec3(0, 0, 0));
  acc.samples = {{outlier}, {RigidTransform::identity()}, {RigidTransform::identity()},
                 {RigidTransform::identity()}};
  s = select_optimal(acc, probes);
  EXPECT_EQ(s.index, 1u);
  EXPECT_LT(max_abs_diff(s.best, RigidTransform::identity()), 1e-15);
  EXPECT_NEAR(s.d_total, transform_distance(RigidTransform::identity(), outlier, probes), 1e-12);
  EXPECT_NEAR(s.d_mean, s.d_total / 4.0, 1e-15);
}

TEST(SelectOptimal, MatchesBruteForce) {
  const ProbeFrame probes = make_probe_frame(0.04);
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> size(1, 50);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<RigidTransform> ts;
    const int n = size(rng);
    for (int i = 0; i < n; ++i) ts.push_back(random_transform(rng, 0.2));
    // Inject exact duplicates so the tie-break is exercised.
    if (n > 3) ts[n - 1] = ts[1];
    PairAccumulator acc;
    for (const auto& t : ts) acc.samples.push_back({t});
    const PairSelection s = select_optimal(acc, probes);
    EXPECT_EQ(s.index, brute_argmin(ts, probes)) << "trial " << trial;
    double d = 0.0;
    for (const auto& t : ts) d += brute_distance(ts[s.index], t, probes);
    EXPECT_NEAR(s.d_total, d, 1e-12 * std::max(1.0, d));
  }
}

TEST(SelectOptimal, PermutationInvariant) {
  const ProbeFrame probes = make_probe_frame(0.04);
  std::mt19937_64 rng(5);
  std::vector<RigidTransform> ts;
  for (int i = 0; i < 30; ++i) ts.push_back(random_transform(rng, 0.1));
  const std::size_t idx = argmin_total_distance(ts, probes, nullptr);
  const RigidTransform chosen = ts[idx];
  for (int k = 0; k < 10; ++k) {
    std::shuffle(ts.begin(), ts.end(), rng);
    EXPECT_LT(max_abs_diff(ts[argmin_total_distance(ts, probes, nullptr)], chosen), 1e-15);
  }
}

TEST(Accumulate, ZeroNoiseSamplesMatchGroundTruth) {
  SceneSpec spec;
  spec.n_frames = 20;
  const SyntheticScene scene = generate(spec);
  const CandidateTable table = build_candidate_table(scene.dataset, 1.0);
  const auto& cams = scene.gt.cams_gt.poses;
  const auto& markers = scene.gt.markers_gt.poses;

  auto cam_accs = accumulate_camera_pairs(table, {});
  ASSERT_FALSE(cam_accs.empty());
  for (const auto& [key, acc] : cam_accs) {
    const RigidTransform truth = cams.at(key.a).inverse() * cams.at(key.b);
    for (const auto& s : acc.samples) {
      EXPECT_LT(rotation_angle_between(s.transform, truth), 1e-6);
      EXPECT_LT((s.transform.translation - truth.translation).norm(), 1e-6);
    }
  }
  auto marker_accs = accumulate_marker_pairs(table, {});
  ASSERT_FALSE(marker_accs.empty());
  for (const auto& [key, acc] : marker_accs) {
    const RigidTransform truth = markers.at(key.a).inverse() * markers.at(key.b);
    for (const auto& s : acc.samples) {
      EXPECT_LT(rotation_angle_between(s.transform, truth), 1e-6);
      EXPECT_LT((s.transform.translation - truth.translation).norm(), 1e-6);
    }
  }
}

TEST(Accumulate, AmbiguousPairContainsTruth) {
  SceneSpec spec;
  spec.n_frames = 10;
  spec.circle_radius = 2.0;
  spec.ambiguity_stress = true;
  const SyntheticScene scene = generate(spec);
  // A huge threshold keeps both solutions of every detection.
  const CandidateTable table = build_candidate_table(scene.dataset, 1e20);
  const auto& markers = scene.gt.markers_gt.poses;
  auto accs = accumulate_marker_pairs(table, {});
  ASSERT_FALSE(accs.empty());
  std::size_t ambiguous_products = 0;
  for (const auto& [key, acc] : accs) {
    const RigidTransform truth = markers.at(key.a).inverse() * markers.at(key.b);
    // Group by (t, cam): the true transform is one of the product elements.
    std::map<std::pair<int, int>, double> best;
    for (const auto& s : acc.samples) {
      auto [it, fresh] = best.try_emplace({s.t, s.bridge}, 1e9);
      it->second = std::min(it->second, max_abs_diff(s.transform, truth));
      if (s.product_index == 3) ++ambiguous_products;
    }
    for (const auto& [tc, d] : best) EXPECT_LT(d, 1e-6) << tc.first << "/" << tc.second;
  }
  EXPECT_GT(ambiguous_products, 0u);
}

TEST(Accumulate, SamplesSortedAndCapped) {
  SceneSpec spec;
  spec.n_frames = 30;
  const SyntheticScene scene = generate(spec);
  const CandidateTable table = build_candidate_table(scene.dataset, 2.0);
  auto accs = accumulate_camera_pairs(table, {});
  for (const auto& [key, acc] : accs) {
    EXPECT_TRUE(std::is_sorted(acc.samples.begin(), acc.samples.end(), [](const auto& x, const auto& y) {
      return std::tie(x.t, x.bridge, x.product_index) < std::tie(y.t, y.bridge, y.product_index);
    }));
  }
  AccumulateOptions cap;
  cap.max_samples_per_pair = 5;
  for (const auto& [key, acc] : accumulate_camera_pairs(table, cap)) EXPECT_LE(acc.samples.size(), 5u);
}
