#pragma once

#include <map>
#include <optional>
#include <vector>

#include "mrig/geometry.hpp"
#include "mrig/pairwise.hpp"
#include "mrig/structure_init.hpp"

namespace mrig {

struct FrameCandidate {
  RigidTransform transform;  // reference marker -> reference camera
  int cam = 0;
  int marker = 0;
  double ratio = 1.0;
};

struct FramePoseCandidates {
  int t = 0;
  std::vector<FrameCandidate> candidates;
};

enum class PoseSource { Init, Refined, Tracked };

struct FramePose {
  std::optional<RigidTransform> pose;  // empty when untracked
  PoseSource source = PoseSource::Init;
  bool tracked() const { return pose.has_value(); }
};

/// Object pose per frame index.
struct Trajectory {
  std::map<int, FramePose> frames;
};

/// Candidate object poses C_c * T * M_m^-1 for every transform of every
/// candidate set at frame t. Observations whose camera or marker is missing
/// from the structure estimates are skipped.
FramePoseCandidates frame_candidates(int t, const CandidateTable& table,
                                     const StructureEstimate& cams,
                                     const StructureEstimate& markers);

/// Candidate minimizing the summed probe distance to all others (lowest index
/// on ties). Throws NoDetectionsInFrame when there are no candidates.
RigidTransform select_frame_pose(const FramePoseCandidates& c, const ProbeFrame& probes);

/// Initial trajectory over frames [0, n_frames): selected pose per frame, or
/// untracked when the frame has no detections.
Trajectory build_trajectory(int n_frames, const CandidateTable& table,
                            const StructureEstimate& cams, const StructureEstimate& markers,
                            const ProbeFrame& probes);

}  // namespace mrig
