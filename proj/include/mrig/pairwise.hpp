#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mrig/geometry.hpp"
#include "mrig/planar_pose.hpp"

namespace mrig {

enum class PairKind { Camera, Marker };

/// Unordered pair of camera ids or marker ids, stored with a < b.
struct PairKey {
  int a = 0;
  int b = 0;
  PairKind kind = PairKind::Camera;

  /// Throws std::invalid_argument when i == j.
  static PairKey make(int i, int j, PairKind kind);

  auto operator<=>(const PairKey&) const = default;
};

/// One observed relative transform between the members of a pair.
/// For a key (a, b) the transform maps b-coordinates into a-coordinates.
struct TransformSample {
  RigidTransform transform;
  int t = 0;
  int bridge = 0;         // marker id (camera pairs) or camera id (marker pairs)
  int product_index = 0;  // position in the Cartesian product of the two sets
  bool from_ambiguous = false;
};

struct PairSelection {
  RigidTransform best;
  std::size_t index = 0;
  double d_total = 0.0;  // m^2
  double d_mean = 0.0;   // d_total / sample count
};

struct PairAccumulator {
  PairKey key;
  std::vector<TransformSample> samples;
  std::optional<PairSelection> selected;
};

/// Three probe points used to compare transforms: the axis points at
/// distance `scale` from the origin.
using ProbeFrame = std::array<Vec3, 3>;
ProbeFrame make_probe_frame(double scale);

/// Sum over the probes of the squared distance between a*v and b*v.
double transform_distance(const RigidTransform& a, const RigidTransform& b,
                          const ProbeFrame& probes);

/// Camera j -> camera i transforms T_i * T_j^-1 for every element of the
/// Cartesian product of the two marker -> camera sets (same frame, same marker).
std::vector<TransformSample> camera_pair_samples(const CandidateSet& xi_i,
                                                 const CandidateSet& xi_j, int t,
                                                 int marker);

/// Marker i -> marker j transforms T_j^-1 * T_i for every element of the
/// Cartesian product of the two marker -> camera sets (same frame, same camera).
std::vector<TransformSample> marker_pair_samples(const CandidateSet& xi_i,
                                                 const CandidateSet& xi_j, int t, int cam);

/// Index of the transform minimizing the summed probe distance to all others.
/// Ties go to the lowest index. `d_total` receives the winning score.
std::size_t argmin_total_distance(std::span<const RigidTransform> transforms,
                                  const ProbeFrame& probes, double* d_total = nullptr);

/// Throws EmptyCandidateSet when the accumulator has no samples.
PairSelection select_optimal(const PairAccumulator& acc, const ProbeFrame& probes);

struct ObservationKey {
  int t = 0;
  int cam = 0;
  int marker = 0;
  auto operator<=>(const ObservationKey&) const = default;
};

using CandidateTable = std::map<ObservationKey, CandidateSet>;

struct AccumulateOptions {
  /// 0 keeps every sample. Otherwise pairs with more samples are uniformly
  /// subsampled under `seed`.
  std::size_t max_samples_per_pair = 0;
  std::uint64_t seed = 0;
};

/// Collects every camera-pair sample over all co-observations, sorted by
/// (t, bridge, product index). Accumulators come back without a selection.
std::map<PairKey, PairAccumulator> accumulate_camera_pairs(const CandidateTable& table,
                                                           const AccumulateOptions& opts = {});
std::map<PairKey, PairAccumulator> accumulate_marker_pairs(const CandidateTable& table,
                                                           const AccumulateOptions& opts = {});

/// Runs select_optimal on every accumulator in place.
void select_all(std::map<PairKey, PairAccumulator>& accs, const ProbeFrame& probes);

}  // namespace mrig
