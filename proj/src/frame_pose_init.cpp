#include "mrig/frame_pose_init.hpp"

#include <limits>

#include "mrig/errors.hpp"

namespace mrig {

FramePoseCandidates frame_candidates(int t, const CandidateTable& table,
                                     const StructureEstimate& cams,
                                     const StructureEstimate& markers) {
  FramePoseCandidates out;
  out.t = t;
  auto it = table.lower_bound(ObservationKey{t, std::numeric_limits<int>::min(),
                                             std::numeric_limits<int>::min()});
  for (; it != table.end() && it->first.t == t; ++it) {
    const auto& [key, set] = *it;
    auto cam = cams.poses.find(key.cam);
    auto marker = markers.poses.find(key.marker);
    if (cam == cams.poses.end() || marker == markers.poses.end()) continue;
    const RigidTransform marker_inv = marker->second.inverse();
    for (const auto& tr : set.transforms) {
      out.candidates.push_back(
          {cam->second * tr * marker_inv, key.cam, key.marker, set.ratio.value_or(1.0)});
    }
  }
  return out;
}

RigidTransform select_frame_pose(const FramePoseCandidates& c, const ProbeFrame& probes) {
  if (c.candidates.empty()) throw NoDetectionsInFrame(c.t);
  std::vector<RigidTransform> transforms;
  transforms.reserve(c.candidates.size());
  for (const auto& cand : c.candidates) transforms.push_back(cand.transform);
  return transforms[argmin_total_distance(transforms, probes)];
}

Trajectory build_trajectory(int n_frames, const CandidateTable& table,
                            const StructureEstimate& cams, const StructureEstimate& markers,
                            const ProbeFrame& probes) {
  Trajectory traj;
  for (int t = 0; t < n_frames; ++t) {
    FramePose fp;
    fp.source = PoseSource::Init;
    const auto cands = frame_candidates(t, table, cams, markers);
    if (!cands.candidates.empty()) fp.pose = select_frame_pose(cands, probes);
    traj.frames[t] = fp;
  }
  return traj;
}

}  // namespace mrig
