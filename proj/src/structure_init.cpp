#include "mrig/structure_init.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "mrig/errors.hpp"

namespace mrig {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<int> rank_;
};

const char* kind_name(PairKind k) { return k == PairKind::Camera ? "camera" : "marker"; }

}  // namespace

double edge_weight(double d_mean, std::size_t samples, double tau_n) {
  if (samples == 0) throw std::invalid_argument("edge needs at least one sample");
  return d_mean * std::max(1.0, tau_n / static_cast<double>(samples));
}

PoseGraph build_graph(const std::map<PairKey, PairAccumulator>& accumulators, double tau_n,
                      const std::set<int>& vertices, PairKind kind, const ProbeFrame& probes) {
  if (tau_n < 1.0) throw std::invalid_argument("tau_n must be >= 1");
  PoseGraph g;
  g.kind = kind;
  g.vertices = vertices;
  for (const auto& [key, acc] : accumulators) {
    if (acc.samples.empty()) continue;
    const PairSelection sel = acc.selected ? *acc.selected : select_optimal(acc, probes);
    GraphEdge e;
    e.samples = acc.samples.size();
    e.d_mean = sel.d_total / static_cast<double>(e.samples);
    e.weight = edge_weight(e.d_mean, e.samples, tau_n);
    e.transform = sel.best;
    g.edges.emplace(key, e);
    g.vertices.insert(key.a);
    g.vertices.insert(key.b);
  }
  return g;
}

std::vector<std::vector<int>> connected_components(const PoseGraph& g) {
  std::vector<int> ids(g.vertices.begin(), g.vertices.end());
  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;
  DisjointSets sets(ids.size());
  for (const auto& [key, e] : g.edges) sets.unite(index.at(key.a), index.at(key.b));
  std::map<std::size_t, std::vector<int>> by_root;
  for (std::size_t i = 0; i < ids.size(); ++i) by_root[sets.find(i)].push_back(ids[i]);
  std::vector<std::vector<int>> comps;
  for (auto& [root, members] : by_root) comps.push_back(std::move(members));
  std::sort(comps.begin(), comps.end(),
            [](const auto& x, const auto& y) { return x.front() < y.front(); });
  return comps;
}

std::vector<PairKey> minimum_spanning_tree(const PoseGraph& g) {
  std::vector<int> ids(g.vertices.begin(), g.vertices.end());
  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;

  std::vector<std::pair<double, PairKey>> order;
  order.reserve(g.edges.size());
  for (const auto& [key, e] : g.edges) order.emplace_back(e.weight, key);
  std::sort(order.begin(), order.end());

  DisjointSets sets(ids.size());
  std::vector<PairKey> tree;
  for (const auto& [w, key] : order) {
    if (sets.unite(index.at(key.a), index.at(key.b))) tree.push_back(key);
  }
  if (!ids.empty() && tree.size() + 1 != ids.size()) {
    auto comps = connected_components(g);
    std::ostringstream msg;
    msg << "the " << kind_name(g.kind) << " co-observation graph is disconnected; components:";
    for (const auto& c : comps) {
      msg << " {";
      for (std::size_t i = 0; i < c.size(); ++i) msg << (i ? "," : "") << c[i];
      msg << "}";
    }
    throw DisconnectedGraph(msg.str(), std::move(comps));
  }
  return tree;
}

StructureEstimate chain_poses(const PoseGraph& g, const std::vector<PairKey>& tree,
                              int reference) {
  if (!g.vertices.count(reference)) {
    throw std::invalid_argument("reference id is not a graph vertex");
  }
  std::map<int, std::vector<PairKey>> adjacency;
  for (const auto& key : tree) {
    adjacency[key.a].push_back(key);
    adjacency[key.b].push_back(key);
  }
  StructureEstimate out;
  out.reference = reference;
  out.tree_edges = tree;
  out.poses[reference] = RigidTransform::identity();
  std::queue<int> frontier;
  frontier.push(reference);
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (const auto& key : adjacency[u]) {
      const int w = key.a == u ? key.b : key.a;
      if (out.poses.count(w)) continue;
      const RigidTransform& stored = g.edges.at(key).transform;  // b -> a
      const RigidTransform u_from_w = key.a == u ? stored : stored.inverse();
      out.poses[w] = out.poses[u] * u_from_w;
      frontier.push(w);
    }
  }
  if (out.poses.size() != g.vertices.size()) {
    throw std::invalid_argument("tree does not span every vertex");
  }
  return out;
}

std::string to_dot(const PoseGraph& g, const std::vector<PairKey>& tree,
                   const std::string& name) {
  std::ostringstream os;
  os << "graph " << name << " {\n";
  for (int v : g.vertices) os << "  " << kind_name(g.kind)[0] << v << ";\n";
  for (const auto& [key, e] : g.edges) {
    const bool in_tree = std::find(tree.begin(), tree.end(), key) != tree.end();
    os << "  " << kind_name(g.kind)[0] << key.a << " -- " << kind_name(g.kind)[0] << key.b
       << " [label=\"w=" << e.weight << " s=" << e.samples << "\"" << (in_tree ? ", style=bold" : "")
       << "];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace mrig
