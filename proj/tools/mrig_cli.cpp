// mrig: multi-camera marker rig calibration and tracking.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <Eigen/Geometry>

#include "mrig/errors.hpp"
#include "mrig/evaluation.hpp"
#include "mrig/io.hpp"
#include "mrig/pipeline.hpp"
#include "mrig/scene_synth.hpp"

namespace fs = std::filesystem;
using namespace mrig;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kValidation = 2, kDisconnected = 3, kNumerical = 4 };

int default_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

struct CalibrateArgs {
  std::string detections, intrinsics, out, trajectory_csv, dump_graph;
  double marker_side = 0.04;
  double tau_ratio = kDefaultTauRatio;
  double tau_n = kDefaultTauN;
  int max_iters = 10000;
  double min_improve = 1e-4;
  std::optional<int> ref_camera, ref_marker;
  int threads = default_threads();
};

void print_graph(const PoseGraph& g, const StructureEstimate& s, const char* label) {
  std::printf("%s graph: %zu vertices, %zu edges, reference %d\n", label, g.vertices.size(),
              g.edges.size(), s.reference);
  for (const auto& k : s.tree_edges) {
    const GraphEdge& e = g.edges.at(k);
    std::printf("  tree %d-%d  weight %.6g  samples %zu\n", k.a, k.b, e.weight, e.samples);
  }
}

int run_calibrate(const CalibrateArgs& a) {
  Dataset data = io::load_dataset(a.detections, a.intrinsics, a.marker_side);
  std::printf("loaded %zu detections, %zu cameras, %zu markers, %d frames\n",
              data.detections.size(), data.camera_ids().size(), data.marker_ids().size(),
              data.n_frames);

  PipelineOptions opts;
  opts.tau_ratio = a.tau_ratio;
  opts.tau_n = a.tau_n;
  opts.ref_camera = a.ref_camera;
  opts.ref_marker = a.ref_marker;
  opts.solver.max_iters = a.max_iters;
  opts.solver.min_improve = a.min_improve;
  opts.solver.threads = a.threads;

  const Initialization init = initialize(data, opts);
  std::printf("candidate sets: %zu ambiguous, %zu rejected\n", init.stats.ambiguous,
              init.stats.rejected);
  print_graph(init.camera_graph, init.result.cams, "camera");
  print_graph(init.marker_graph, init.result.markers, "marker");
  if (!a.dump_graph.empty()) {
    io::write_file_atomic(a.dump_graph,
                          to_dot(init.camera_graph, init.result.cams.tree_edges, "cameras") +
                              to_dot(init.marker_graph, init.result.markers.tree_edges, "markers"));
  }

  const CalibrationResult result = refine_all(init.result, data, opts.solver);
  std::printf("rms before %.6g px, after %.6g px, %d iterations (%s)\n",
              result.report.initial_rms, result.report.final_rms, result.report.iterations,
              result.report.termination.c_str());
  if (result.report.final_rms > kHighRmsWarning) {
    std::fprintf(stderr,
                 "warning: final rms %.3g px exceeds %.3g px; the solution is probably a local "
                 "minimum (try --tau-ratio 1 or another --ref-camera)\n",
                 result.report.final_rms, kHighRmsWarning);
  }
  io::write_file_atomic(a.out, io::format_calibration(result));
  if (!a.trajectory_csv.empty()) {
    io::write_file_atomic(a.trajectory_csv, io::format_trajectory_csv(result.traj));
  }
  return kOk;
}

struct TrackArgs {
  std::string detections, intrinsics, calibration, out;
  int max_iters = 10000;
  double min_improve = 1e-4;
};

void print_track_row(const TrackedFrame& f) {
  if (!f.pose) {
    std::printf("%d,untracked,,,,,,,,,%.4f\n", f.t, f.solve_ms);
    return;
  }
  Eigen::Quaterniond q(f.pose->rotation);
  if (q.w() < 0) q.coeffs() *= -1.0;
  const Vec3& p = f.pose->translation;
  std::printf("%d,tracked,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.6g,%.4f\n", f.t, p.x(), p.y(),
              p.z(), q.x(), q.y(), q.z(), q.w(), f.rms, f.solve_ms);
}

int run_track(const TrackArgs& a) {
  const CalibrationResult calib = io::parse_calibration(io::read_file(a.calibration));
  const auto intrinsics = io::parse_intrinsics(io::read_file(a.intrinsics));
  SolverOptions solver;
  solver.max_iters = a.max_iters;
  solver.min_improve = a.min_improve;
  SequenceTracker tracker(calib, intrinsics, solver);

  std::ifstream file;
  std::istream* in = &std::cin;
  if (a.detections != "-") {
    file.open(a.detections);
    if (!file) throw ValidationError("cannot open " + a.detections);
    in = &file;
  }

  Trajectory traj;
  std::vector<double> times;
  std::vector<Detection> frame;
  int next_t = 0;
  auto flush = [&](int upto) {
    // Emits every frame in [next_t, upto]; only `upto` can have detections.
    for (; next_t <= upto; ++next_t) {
      std::span<const Detection> dets;
      if (next_t == upto) dets = frame;
      const TrackedFrame f = tracker.track(next_t, dets);
      print_track_row(f);
      std::fflush(stdout);
      times.push_back(f.solve_ms);
      FramePose fp;
      fp.pose = f.pose;
      fp.source = PoseSource::Tracked;
      traj.frames[f.t] = fp;
    }
    frame.clear();
  };

  std::printf("t,status,tx,ty,tz,qx,qy,qz,qw,rms,solve_ms\n");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(*in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Detection d = io::parse_detection(line, line_no);
    if (!intrinsics.count(d.cam)) throw MissingIntrinsics(d.cam);
    if (!frame.empty() && d.t != frame.front().t) flush(frame.front().t);
    if (d.t < next_t) {
      throw ValidationError("line " + std::to_string(line_no) + ": frame " +
                            std::to_string(d.t) + " arrives out of order");
    }
    frame.push_back(d);
  }
  if (!frame.empty()) flush(frame.front().t);

  if (!times.empty()) {
    double sum = 0.0;
    for (double t : times) sum += t;
    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    const double mean = sum / static_cast<double>(n);
    std::fprintf(stderr, "%zu frames, mean solve %.4f ms, median %.4f ms, %.1f frames/s\n", n,
                 mean, median, sum > 0 ? 1000.0 * static_cast<double>(n) / sum : 0.0);
  }
  if (!a.out.empty()) io::write_file_atomic(a.out, io::format_trajectory_csv(traj));
  return kOk;
}

int run_synth(const std::string& spec_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed) {
  SceneSpec spec;
  if (!spec_path.empty()) spec = io::parse_scene_spec(io::read_file(spec_path));
  if (seed) spec.seed = *seed;
  const SyntheticScene scene = generate(spec);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  io::save_dataset(scene.dataset, dir / "detections.jsonl", dir / "intrinsics.json");
  io::write_file_atomic(dir / "ground_truth.json", io::format_ground_truth(scene.gt));
  std::printf("%zu detections, %d cameras, %zu markers, %d frames -> %s\n",
              scene.dataset.detections.size(), spec.n_cameras,
              scene.gt.markers_gt.poses.size(), spec.n_frames, out_dir.c_str());
  return kOk;
}

int run_eval(const std::string& result_path, const std::string& gt_path, const std::string& out) {
  const CalibrationResult r = io::parse_calibration(io::read_file(result_path));
  const GroundTruth gt = io::parse_ground_truth(io::read_file(gt_path));
  const ErrorReport e = evaluate(r, gt);
  std::printf("frames                 %zu\n", e.frames);
  std::printf("object translation     %.4f mm\n", e.obj_trans_err);
  std::printf("object rotation        %.4f deg\n", e.obj_rot_err);
  std::printf("camera translation     %.4f mm\n", e.cam_trans_err);
  std::printf("marker configuration   %.4f mm\n", e.marker_config_err);
  if (!out.empty()) io::write_file_atomic(out, io::format_error_report(e));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-camera square-marker rig calibration and object tracking"};
  app.require_subcommand(1);

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Estimate cameras, marker layout and object poses");
  c->add_option("--detections", cal.detections, "Detections (JSON lines)")->required();
  c->add_option("--intrinsics", cal.intrinsics, "Camera intrinsics (JSON)")->required();
  c->add_option("--marker-side", cal.marker_side, "Marker side length in meters")
      ->check(CLI::PositiveNumber)->capture_default_str();
  c->add_option("--out", cal.out, "Calibration output (JSON)")->required();
  c->add_option("--trajectory-csv", cal.trajectory_csv, "Also write the object trajectory as CSV");
  c->add_option("--tau-ratio", cal.tau_ratio, "Ambiguity ratio threshold")->capture_default_str();
  c->add_option("--tau-n", cal.tau_n, "Sample-count weighting threshold")->capture_default_str();
  c->add_option("--max-iters", cal.max_iters)->capture_default_str();
  c->add_option("--min-improve", cal.min_improve)->capture_default_str();
  c->add_option("--ref-camera", cal.ref_camera, "Reference camera id (default lowest)");
  c->add_option("--ref-marker", cal.ref_marker, "Reference marker id (default lowest)");
  c->add_option("--dump-graph", cal.dump_graph, "Write both pose graphs in DOT format");
  c->add_option("--threads", cal.threads, "Residual assembly threads")->capture_default_str();

  TrackArgs trk;
  auto* t = app.add_subcommand("track", "Track the object with a fixed calibration");
  t->add_option("--detections", trk.detections, "Detections (JSON lines), '-' for stdin")
      ->required();
  t->add_option("--intrinsics", trk.intrinsics)->required();
  t->add_option("--calibration", trk.calibration)->required();
  t->add_option("--out", trk.out, "Trajectory CSV");
  t->add_option("--max-iters", trk.max_iters)->capture_default_str();
  t->add_option("--min-improve", trk.min_improve)->capture_default_str();

  std::string spec_path, out_dir;
  std::optional<std::uint64_t> seed;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset with ground truth");
  s->add_option("--spec", spec_path, "Scene spec (JSON); defaults when omitted");
  s->add_option("--out-dir", out_dir)->required();
  s->add_option("--seed", seed, "Override the spec seed");

  std::string result_path, gt_path, eval_out;
  auto* e = app.add_subcommand("eval", "Compare a calibration against ground truth");
  e->add_option("--result", result_path)->required();
  e->add_option("--ground-truth", gt_path)->required();
  e->add_option("--out", eval_out, "Error report (JSON)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c->parsed()) return run_calibrate(cal);
    if (t->parsed()) return run_track(trk);
    if (s->parsed()) return run_synth(spec_path, out_dir, seed);
    if (e->parsed()) return run_eval(result_path, gt_path, eval_out);
  } catch (const DisconnectedGraph& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    for (const auto& comp : ex.components) {
      std::string ids;
      for (int id : comp) ids += (ids.empty() ? "" : " ") + std::to_string(id);
      std::fprintf(stderr, "  component: {%s}\n", ids.c_str());
    }
    std::fprintf(stderr, "  add observations where these groups see a common marker\n");
    return kDisconnected;
  } catch (const ValidationError& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kValidation;
  } catch (const ParseError& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kValidation;
  } catch (const InvalidSpec& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kValidation;
  } catch (const NumericalFailure& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    std::fprintf(stderr, "  check intrinsics and marker side; try --tau-ratio 1 or more frames\n");
    return kNumerical;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kOther;
  }
  return kOther;
}
