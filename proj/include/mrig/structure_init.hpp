#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "mrig/geometry.hpp"
#include "mrig/pairwise.hpp"

namespace mrig {

inline constexpr double kDefaultTauN = 10.0;

struct GraphEdge {
  double weight = 0.0;  // d_mean * max(1, tau_n / samples)
  double d_mean = 0.0;
  std::size_t samples = 0;
  RigidTransform transform;  // b -> a for key (a, b)
};

/// Undirected co-observation graph over camera ids or marker ids.
struct PoseGraph {
  PairKind kind = PairKind::Camera;
  std::set<int> vertices;
  std::map<PairKey, GraphEdge> edges;
};

/// Absolute poses relative to a reference entity. poses[id] maps id
/// coordinates into reference coordinates; poses[reference] is the identity.
struct StructureEstimate {
  int reference = 0;
  std::map<int, RigidTransform> poses;
  std::vector<PairKey> tree_edges;
};

/// Edge weight for a pair with mean distance `d_mean` over `samples` samples.
double edge_weight(double d_mean, std::size_t samples, double tau_n);

/// One edge per accumulator with at least one sample. Accumulators without a
/// selection are selected here using `probes`. `vertices` lists every id that
/// must be spanned (including ids with no edges).
PoseGraph build_graph(const std::map<PairKey, PairAccumulator>& accumulators, double tau_n,
                      const std::set<int>& vertices, PairKind kind, const ProbeFrame& probes);

/// Kruskal with edges sorted by (weight, key). Throws DisconnectedGraph with
/// the connected components when the graph does not span every vertex.
std::vector<PairKey> minimum_spanning_tree(const PoseGraph& g);

/// Connected components, each sorted, ordered by smallest member.
std::vector<std::vector<int>> connected_components(const PoseGraph& g);

/// Composes edge transforms along the tree path from each vertex to
/// `reference`.
StructureEstimate chain_poses(const PoseGraph& g, const std::vector<PairKey>& tree,
                              int reference);

/// Graphviz rendering; tree edges are drawn bold.
std::string to_dot(const PoseGraph& g, const std::vector<PairKey>& tree,
                   const std::string& name);

}  // namespace mrig
