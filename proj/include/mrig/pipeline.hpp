#pragma once

#include <optional>
#include <vector>

#include "mrig/dataset.hpp"
#include "mrig/optimizer.hpp"
#include "mrig/pairwise.hpp"
#include "mrig/structure_init.hpp"

namespace mrig {

/// Final per-corner rms (px) above which a calibration most likely converged
/// to a wrong local minimum, typically after an ambiguous initialization.
inline constexpr double kHighRmsWarning = 2.0;

struct PipelineOptions {
  double tau_ratio = kDefaultTauRatio;
  double tau_n = kDefaultTauN;
  std::optional<int> ref_camera;  // default: lowest camera id in the data
  std::optional<int> ref_marker;  // default: lowest marker id in the data
  SolverOptions solver;
  AccumulateOptions accumulate;
};

struct CandidateStats {
  std::size_t detections = 0;
  std::size_t ambiguous = 0;  // candidate sets with two transforms
  std::size_t rejected = 0;   // degenerate quads or no valid pose
};

/// Candidate set for every detection of the dataset.
CandidateTable build_candidate_table(const Dataset& data, double tau_ratio,
                                     CandidateStats* stats = nullptr);

struct Initialization {
  CalibrationResult result;  // source = init, report holds the initial cost only
  PoseGraph camera_graph;
  PoseGraph marker_graph;
  CandidateStats stats;
};

/// Candidate sets, pairwise selection, both spanning trees and the initial
/// trajectory. Throws DisconnectedGraph or ValidationError.
Initialization initialize(const Dataset& data, const PipelineOptions& opts);

struct CalibrationRun {
  Initialization init;
  CalibrationResult result;
};

/// initialize() followed by global refinement.
CalibrationRun calibrate(const Dataset& data, const PipelineOptions& opts);

struct TrackedFrame {
  int t = 0;
  std::optional<RigidTransform> pose;
  double rms = 0.0;
  int iterations = 0;
  double solve_ms = 0.0;
};

/// Tracks frames in order, warm-starting each from the previous tracked pose.
class SequenceTracker {
 public:
  SequenceTracker(const CalibrationResult& calib, std::map<int, CameraIntrinsics> intrinsics,
                  SolverOptions opts = {});
  TrackedFrame track(int t, std::span<const Detection> dets);

 private:
  StructureEstimate cams_;
  StructureEstimate markers_;
  std::map<int, CameraIntrinsics> intrinsics_;
  MarkerTemplate tmpl_;
  SolverOptions opts_;
  std::optional<RigidTransform> last_;
};

/// Tracks every frame in [0, n_frames) of the dataset.
std::vector<TrackedFrame> track_dataset(const Dataset& data, const CalibrationResult& calib,
                                        const SolverOptions& opts = {});

}  // namespace mrig
