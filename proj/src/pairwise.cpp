#include "mrig/pairwise.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <tuple>

#include "mrig/errors.hpp"

namespace mrig {

namespace {

std::vector<TransformSample> product_samples(const CandidateSet& xi_i, const CandidateSet& xi_j,
                                             int t, int bridge, bool camera_pair) {
  std::vector<TransformSample> out;
  out.reserve(xi_i.size() * xi_j.size());
  const bool ambiguous = xi_i.ambiguous() || xi_j.ambiguous();
  int index = 0;
  for (const auto& ti : xi_i.transforms) {
    for (const auto& tj : xi_j.transforms) {
      TransformSample s;
      s.transform = camera_pair ? ti * tj.inverse() : tj.inverse() * ti;
      s.t = t;
      s.bridge = bridge;
      s.product_index = index++;
      s.from_ambiguous = ambiguous;
      out.push_back(s);
    }
  }
  return out;
}

void finalize(std::map<PairKey, PairAccumulator>& accs, const AccumulateOptions& opts) {
  for (auto& [key, acc] : accs) {
    auto& s = acc.samples;
    std::sort(s.begin(), s.end(), [](const TransformSample& x, const TransformSample& y) {
      return std::tie(x.t, x.bridge, x.product_index) < std::tie(y.t, y.bridge, y.product_index);
    });
    if (opts.max_samples_per_pair > 0 && s.size() > opts.max_samples_per_pair) {
      std::mt19937_64 rng(opts.seed ^ (static_cast<std::uint64_t>(key.a) << 32) ^
                          static_cast<std::uint64_t>(key.b));
      std::vector<std::size_t> idx(s.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(opts.max_samples_per_pair);
      std::sort(idx.begin(), idx.end());
      std::vector<TransformSample> kept;
      kept.reserve(idx.size());
      for (auto i : idx) kept.push_back(s[i]);
      s = std::move(kept);
    }
  }
}

}  // namespace

PairKey PairKey::make(int i, int j, PairKind kind) {
  if (i == j) throw std::invalid_argument("pair members must differ");
  return {std::min(i, j), std::max(i, j), kind};
}

ProbeFrame make_probe_frame(double scale) {
  return {Vec3(scale, 0.0, 0.0), Vec3(0.0, scale, 0.0), Vec3(0.0, 0.0, scale)};
}

double transform_distance(const RigidTransform& a, const RigidTransform& b,
                          const ProbeFrame& probes) {
  double d = 0.0;
  for (const auto& v : probes) d += (a * v - b * v).squaredNorm();
  return d;
}

std::vector<TransformSample> camera_pair_samples(const CandidateSet& xi_i,
                                                 const CandidateSet& xi_j, int t, int marker) {
  return product_samples(xi_i, xi_j, t, marker, true);
}

std::vector<TransformSample> marker_pair_samples(const CandidateSet& xi_i,
                                                 const CandidateSet& xi_j, int t, int cam) {
  return product_samples(xi_i, xi_j, t, cam, false);
}

std::size_t argmin_total_distance(std::span<const RigidTransform> transforms,
                                  const ProbeFrame& probes, double* d_total) {
  if (transforms.empty()) throw EmptyCandidateSet();
  const std::size_t n = transforms.size();
  // Transformed probes, stacked as one 9-vector per sample.
  std::vector<Eigen::Matrix<double, 9, 1>> moved(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (int l = 0; l < 3; ++l) moved[k].segment<3>(3 * l) = transforms[k] * probes[l];
  }
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    double score = 0.0;
    for (std::size_t s = 0; s < n; ++s) score += (moved[k] - moved[s]).squaredNorm();
    if (score < best_score) {
      best_score = score;
      best = k;
    }
  }
  if (d_total != nullptr) *d_total = best_score;
  return best;
}

PairSelection select_optimal(const PairAccumulator& acc, const ProbeFrame& probes) {
  if (acc.samples.empty()) throw EmptyCandidateSet();
  std::vector<RigidTransform> transforms;
  transforms.reserve(acc.samples.size());
  for (const auto& s : acc.samples) transforms.push_back(s.transform);
  PairSelection sel;
  sel.index = argmin_total_distance(transforms, probes, &sel.d_total);
  sel.best = transforms[sel.index];
  sel.d_mean = sel.d_total / static_cast<double>(transforms.size());
  return sel;
}

std::map<PairKey, PairAccumulator> accumulate_camera_pairs(const CandidateTable& table,
                                                           const AccumulateOptions& opts) {
  // Group by (t, marker): every pair of cameras seeing the same marker at the
  // same time yields samples.
  std::map<std::pair<int, int>, std::vector<std::pair<int, const CandidateSet*>>> groups;
  for (const auto& [key, set] : table) {
    if (!set.empty()) groups[{key.t, key.marker}].emplace_back(key.cam, &set);
  }
  std::map<PairKey, PairAccumulator> accs;
  for (const auto& [tm, members] : groups) {
    for (std::size_t x = 0; x < members.size(); ++x) {
      for (std::size_t y = x + 1; y < members.size(); ++y) {
        auto [ca, sa] = members[x];
        auto [cb, sb] = members[y];
        if (ca > cb) {
          std::swap(ca, cb);
          std::swap(sa, sb);
        }
        const PairKey key = PairKey::make(ca, cb, PairKind::Camera);
        auto& acc = accs[key];
        acc.key = key;
        auto samples = camera_pair_samples(*sa, *sb, tm.first, tm.second);
        acc.samples.insert(acc.samples.end(), samples.begin(), samples.end());
      }
    }
  }
  finalize(accs, opts);
  return accs;
}

std::map<PairKey, PairAccumulator> accumulate_marker_pairs(const CandidateTable& table,
                                                           const AccumulateOptions& opts) {
  std::map<std::pair<int, int>, std::vector<std::pair<int, const CandidateSet*>>> groups;
  for (const auto& [key, set] : table) {
    if (!set.empty()) groups[{key.t, key.cam}].emplace_back(key.marker, &set);
  }
  std::map<PairKey, PairAccumulator> accs;
  for (const auto& [tc, members] : groups) {
    for (std::size_t x = 0; x < members.size(); ++x) {
      for (std::size_t y = x + 1; y < members.size(); ++y) {
        auto [ma, sa] = members[x];
        auto [mb, sb] = members[y];
        if (ma > mb) {
          std::swap(ma, mb);
          std::swap(sa, sb);
        }
        const PairKey key = PairKey::make(ma, mb, PairKind::Marker);
        auto& acc = accs[key];
        acc.key = key;
        // Edge (a, b) stores b -> a, i.e. marker_pair_samples(b, a).
        auto samples = marker_pair_samples(*sb, *sa, tc.first, tc.second);
        acc.samples.insert(acc.samples.end(), samples.begin(), samples.end());
      }
    }
  }
  finalize(accs, opts);
  return accs;
}

void select_all(std::map<PairKey, PairAccumulator>& accs, const ProbeFrame& probes) {
  for (auto& [key, acc] : accs) acc.selected = select_optimal(acc, probes);
}

}  // namespace mrig
