#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "mrig/dataset.hpp"
#include "mrig/geometry.hpp"
#include "mrig/planar_pose.hpp"

namespace mrig {

struct SolverOptions {
  int max_iters = 10000;
  double min_improve = 1e-4;  // mean absolute residual improvement, px
  double lambda_init = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 0.5;
  double max_lambda = 1e10;
  int threads = 1;  // residual assembly; <= 0 means hardware concurrency
};

/// Residual assigned to both coordinates of a corner that falls behind its
/// camera during a trial step.
inline constexpr double kBehindCameraResidual = 1e6;
/// Per-corner RMS below which a problem is considered exactly fitted.
inline constexpr double kExactFitRms = 1e-10;

enum class Termination { Converged, SmallImprovement, MaxIterations, LambdaLimit };
std::string to_string(Termination t);

struct LmReport {
  int iterations = 0;  // linear solves, accepted or not
  int accepted = 0;
  double initial_rms = 0.0;
  double final_rms = 0.0;
  Termination termination = Termination::Converged;
  std::vector<double> cost_history;  // sse at start and after every accepted step
};

struct ResidualSystem {
  Eigen::VectorXd residuals;               // predicted - observed, 8 per observation
  Eigen::SparseMatrix<double> jacobian;    // empty unless requested
  std::size_t behind_camera = 0;           // corners clamped to kBehindCameraResidual
};

using SystemBuilder = std::function<ResidualSystem(const Eigen::VectorXd& x, bool with_jacobian)>;

struct LmResult {
  Eigen::VectorXd params;
  LmReport report;
};

/// Levenberg-Marquardt on (J^T J + lambda I) dx = -J^T f with a sparse
/// Cholesky solve. A step is accepted only if it lowers the cost. `normalize`
/// is applied to every trial point. Throws NumericalFailure on a non-finite
/// starting cost or when the system stays singular up to max_lambda.
LmResult lm_minimize(Eigen::VectorXd x0, const SystemBuilder& builder, const SolverOptions& opts,
                     const std::function<void(Eigen::VectorXd&)>& normalize = {});

/// Wraps rotation vectors with angle > pi back into the canonical range.
void canonicalize_twists(Eigen::VectorXd& x);

/// Column offsets of the 6-parameter blocks. Entities without an offset keep
/// the pose they were given (reference camera and marker always do).
struct ParamLayout {
  std::map<int, int> camera_offset;
  std::map<int, int> marker_offset;
  std::map<int, int> frame_offset;
  int total = 0;

  /// Every non-reference camera and marker and every tracked frame.
  static ParamLayout full(const StructureEstimate& cams, const StructureEstimate& markers,
                          const Trajectory& traj);
  /// Only the pose of frame t.
  static ParamLayout frame_only(int t);
};

/// Reprojection error over a set of observations. Each residual row touches
/// at most the camera, marker and frame block of its observation.
class ReprojectionProblem {
 public:
  ReprojectionProblem(std::vector<Detection> detections,
                      const std::map<int, CameraIntrinsics>& intrinsics, MarkerTemplate tmpl,
                      ParamLayout layout, StructureEstimate cams, StructureEstimate markers,
                      Trajectory traj);

  const ParamLayout& layout() const { return layout_; }
  std::size_t observation_count() const { return detections_.size(); }

  Eigen::VectorXd initial_params() const;
  ResidualSystem build(const Eigen::VectorXd& x, bool with_jacobian, int threads = 1) const;
  void write_back(const Eigen::VectorXd& x, StructureEstimate& cams, StructureEstimate& markers,
                  Trajectory& traj) const;

  /// Per-frame per-corner RMS for the given residual vector.
  std::map<int, double> frame_rms(const Eigen::VectorXd& residuals) const;

 private:
  std::vector<Detection> detections_;
  std::map<int, CameraIntrinsics> intrinsics_;
  MarkerTemplate tmpl_;
  ParamLayout layout_;
  StructureEstimate cams_;
  StructureEstimate markers_;
  Trajectory traj_;
};

struct CostSummary {
  double sse = 0.0;  // px^2
  double rms = 0.0;  // px per corner
  std::size_t behind_camera = 0;
};

/// Total reprojection error. Observations whose frame is untracked or whose
/// camera/marker is unknown are skipped.
CostSummary global_cost(const StructureEstimate& cams, const StructureEstimate& markers,
                        const Trajectory& traj, std::span<const Detection> detections,
                        const std::map<int, CameraIntrinsics>& intrinsics,
                        const MarkerTemplate& tmpl);

/// Jointly refines cameras, markers and frame poses. Reference entries stay
/// exactly identity.
CalibrationResult refine_all(const CalibrationResult& init, const Dataset& data,
                             const SolverOptions& opts);

struct TrackResult {
  std::optional<RigidTransform> pose;  // empty when untracked
  double rms = 0.0;
  LmReport report;
};

/// Six-parameter pose of the reference marker for one frame with cameras and
/// markers held fixed. Warm-started from `warm` when given; otherwise
/// initialized from the detection with the largest ambiguity ratio.
TrackResult track_frame(std::span<const Detection> dets, const StructureEstimate& cams,
                        const StructureEstimate& markers,
                        const std::map<int, CameraIntrinsics>& intrinsics,
                        const MarkerTemplate& tmpl, const std::optional<RigidTransform>& warm,
                        const SolverOptions& opts = {});

}  // namespace mrig
