#include "mrig/pipeline.hpp"

#include <chrono>

#include "mrig/errors.hpp"
#include "mrig/frame_pose_init.hpp"

namespace mrig {

namespace {

int pick_reference(const std::optional<int>& requested, const std::set<int>& ids,
                   const char* what) {
  if (ids.empty()) throw ValidationError(std::string("dataset has no ") + what + "s");
  if (!requested) return *ids.begin();
  if (!ids.count(*requested)) {
    throw ValidationError(std::string("reference ") + what + " " + std::to_string(*requested) +
                          " does not appear in the detections");
  }
  return *requested;
}

}  // namespace

CandidateTable build_candidate_table(const Dataset& data, double tau_ratio,
                                     CandidateStats* stats) {
  const MarkerTemplate tmpl(data.marker_side);
  CandidateTable table;
  CandidateStats local;
  for (const auto& d : data.detections) {
    ++local.detections;
    std::optional<PoseHypothesis> h;
    try {
      h = estimate_two_poses(d, data.intrinsics.at(d.cam), tmpl);
    } catch (const DegenerateQuad&) {
      ++local.rejected;
    } catch (const NoValidPose&) {
      ++local.rejected;
    }
    CandidateSet set = candidate_set(h, tau_ratio);
    if (set.ambiguous()) ++local.ambiguous;
    table.emplace(ObservationKey{d.t, d.cam, d.marker}, std::move(set));
  }
  if (stats != nullptr) *stats = local;
  return table;
}

Initialization initialize(const Dataset& data, const PipelineOptions& opts) {
  data.validate();
  Initialization init;
  const CandidateTable table = build_candidate_table(data, opts.tau_ratio, &init.stats);
  const ProbeFrame probes = make_probe_frame(data.marker_side);

  std::set<int> cam_ids, marker_ids;
  for (const auto& [key, set] : table) {
    if (set.empty()) continue;
    cam_ids.insert(key.cam);
    marker_ids.insert(key.marker);
  }
  const int ref_cam = pick_reference(opts.ref_camera, cam_ids, "camera");
  const int ref_marker = pick_reference(opts.ref_marker, marker_ids, "marker");

  auto cam_accs = accumulate_camera_pairs(table, opts.accumulate);
  select_all(cam_accs, probes);
  init.camera_graph = build_graph(cam_accs, opts.tau_n, cam_ids, PairKind::Camera, probes);
  const auto cam_tree = minimum_spanning_tree(init.camera_graph);

  auto marker_accs = accumulate_marker_pairs(table, opts.accumulate);
  select_all(marker_accs, probes);
  init.marker_graph = build_graph(marker_accs, opts.tau_n, marker_ids, PairKind::Marker, probes);
  const auto marker_tree = minimum_spanning_tree(init.marker_graph);

  CalibrationResult& r = init.result;
  r.marker_side = data.marker_side;
  r.cams = chain_poses(init.camera_graph, cam_tree, ref_cam);
  r.markers = chain_poses(init.marker_graph, marker_tree, ref_marker);
  r.traj = build_trajectory(data.n_frames, table, r.cams, r.markers, probes);

  const CostSummary cost = global_cost(r.cams, r.markers, r.traj, data.detections,
                                       data.intrinsics, MarkerTemplate(data.marker_side));
  r.report.initial_rms = cost.rms;
  r.report.final_rms = cost.rms;
  r.report.termination = "not_refined";
  return init;
}

CalibrationRun calibrate(const Dataset& data, const PipelineOptions& opts) {
  CalibrationRun run;
  run.init = initialize(data, opts);
  run.result = refine_all(run.init.result, data, opts.solver);
  return run;
}

SequenceTracker::SequenceTracker(const CalibrationResult& calib,
                                 std::map<int, CameraIntrinsics> intrinsics, SolverOptions opts)
    : cams_(calib.cams),
      markers_(calib.markers),
      intrinsics_(std::move(intrinsics)),
      tmpl_(calib.marker_side),
      opts_(opts) {}

TrackedFrame SequenceTracker::track(int t, std::span<const Detection> dets) {
  TrackedFrame out;
  out.t = t;
  const auto start = std::chrono::steady_clock::now();
  const TrackResult r = track_frame(dets, cams_, markers_, intrinsics_, tmpl_, last_, opts_);
  out.solve_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  out.pose = r.pose;
  out.rms = r.rms;
  out.iterations = r.report.iterations;
  if (r.pose) last_ = r.pose;
  return out;
}

std::vector<TrackedFrame> track_dataset(const Dataset& data, const CalibrationResult& calib,
                                        const SolverOptions& opts) {
  SequenceTracker tracker(calib, data.intrinsics, opts);
  std::vector<TrackedFrame> out;
  out.reserve(static_cast<std::size_t>(data.n_frames));
  auto it = data.detections.begin();
  for (int t = 0; t < data.n_frames; ++t) {
    auto first = it;
    while (it != data.detections.end() && it->t == t) ++it;
    out.push_back(tracker.track(t, std::span<const Detection>(first, it)));
  }
  return out;
}

}  // namespace mrig
