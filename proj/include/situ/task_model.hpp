#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "situ/classifier.hpp"
#include "situ/demos.hpp"
#include "situ/error.hpp"
#include "situ/hmm.hpp"

namespace situ {

using NodeId = std::uint64_t;
using Edge = std::pair<NodeId, NodeId>;

/// Learning hyper-parameters shared by every model mutation.
struct Settings {
  double theta = 0.5;          // classifier activation threshold
  double tau = 1.0;            // cluster cut, KL-rate units
  double interp_step = 0.1;    // trajectory spacing for policy training
  std::uint64_t seed = 7;      // base seed for distance estimates
  FitOptions fit{};
  ClassifierOptions classifier{};
  DistanceOptions distance{};
};

/// A node of the task automaton: policy, initiation classifier and the
/// segments/start states it was trained on.
struct Primitive {
  NodeId id = 0;
  std::optional<GaussianHMM> policy;
  InitiationClassifier classifier;
  std::vector<DemoSegment> segments;
  std::vector<WorldState> start_states;

  friend bool operator==(const Primitive&, const Primitive&) = default;
};

struct TraversalRecord {
  std::string demo_id;
  std::vector<NodeId> path;

  friend bool operator==(const TraversalRecord&, const TraversalRecord&) = default;
};

struct TaskModel {
  LayoutPtr layout;
  std::map<NodeId, Primitive> nodes;
  std::set<Edge> edges;
  NodeId start_id = 0;
  NodeId next_id = 1;
  std::vector<TraversalRecord> traversal_log;

  /// Number of primitives, the virtual start node included.
  std::size_t kappa() const { return nodes.size(); }

  bool contains(NodeId id) const { return nodes.count(id) != 0; }

  const Primitive& node(NodeId id) const {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw InvalidInput("unknown node " + std::to_string(id));
    return it->second;
  }
  Primitive& node(NodeId id) {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw InvalidInput("unknown node " + std::to_string(id));
    return it->second;
  }

  std::vector<NodeId> children(NodeId id) const {
    std::vector<NodeId> out;
    for (auto it = edges.lower_bound({id, 0}); it != edges.end() && it->first == id; ++it) out.push_back(it->second);
    return out;
  }

  std::vector<NodeId> parents(NodeId id) const {
    std::vector<NodeId> out;
    for (const auto& [u, v] : edges)
      if (v == id) out.push_back(u);
    return out;
  }

  friend bool operator==(const TaskModel& a, const TaskModel& b) {
    const bool layouts = a.layout == b.layout || (a.layout && b.layout && *a.layout == *b.layout);
    return layouts && a.nodes == b.nodes && a.edges == b.edges && a.start_id == b.start_id &&
           a.next_id == b.next_id && a.traversal_log == b.traversal_log;
  }
};

/// Model holding only the virtual start node (no policy, always activated).
inline TaskModel make_task_model(LayoutPtr layout) {
  TaskModel t;
  Primitive start;
  start.id = 0;
  start.classifier.weights.assign(layout->dim(), 0.0);
  start.classifier.degenerate = true;
  t.layout = std::move(layout);
  t.nodes.emplace(0, std::move(start));
  return t;
}

inline NodeId add_node(TaskModel& t, Primitive z) {
  if (t.contains(z.id)) throw InvalidInput("add_node: duplicate id " + std::to_string(z.id));
  const NodeId id = z.id;
  t.nodes.emplace(id, std::move(z));
  t.next_id = std::max(t.next_id, id + 1);
  return id;
}

/// Returns true when the edge was not present before.
inline bool add_edge(TaskModel& t, NodeId u, NodeId v) {
  if (!t.contains(u) || !t.contains(v))
    throw InvalidInput("add_edge: missing endpoint " + std::to_string(u) + "->" + std::to_string(v));
  return t.edges.insert({u, v}).second;
}

inline std::vector<NodeId> applicable_set(const TaskModel& t, const WorldState& s, double theta) {
  std::vector<NodeId> out;
  for (const auto& [id, z] : t.nodes)
    if (id != t.start_id && is_activated(z.classifier, s, theta)) out.push_back(id);
  return out;
}

struct Selection {
  enum class Kind { node, terminal, failure };
  Kind kind = Kind::terminal;
  NodeId node = 0;
  double probability = 0.0;
};

/// Most likely child by classifier confidence; ties go to the lowest id.
inline Selection select_next(const TaskModel& t, NodeId current, const WorldState& s, double theta) {
  t.node(current);
  const auto kids = t.children(current);
  if (kids.empty()) return {Selection::Kind::terminal, current, 0.0};
  NodeId best = kids.front();
  double best_p = -1.0;
  for (NodeId k : kids) {
    const double p = predict_proba(t.node(k).classifier, s);
    if (p > best_p) best = k, best_p = p;
  }
  if (best_p < theta) return {Selection::Kind::failure, current, best_p};
  return {Selection::Kind::node, best, best_p};
}

/// Most frequent reference object in a node's provenance; ties go to the
/// lexicographically smallest id.
inline std::string dominant_reference(const Primitive& z) {
  std::map<std::string, std::size_t> counts;
  for (const auto& seg : z.segments) ++counts[seg.reference_object];
  std::string best;
  std::size_t n = 0;
  for (const auto& [ref, c] : counts)
    if (c > n) best = ref, n = c;
  return best;
}

inline std::vector<Trajectory> trajectories_of(const std::vector<DemoSegment>& segs, double step) {
  std::vector<Trajectory> out;
  out.reserve(segs.size());
  for (const auto& s : segs) out.push_back(interpolate_segment(s, step));
  return out;
}

inline std::size_t state_count_of(const std::vector<DemoSegment>& segs) {
  std::vector<std::size_t> counts;
  for (const auto& s : segs) counts.push_back(s.keyframes.size());
  return state_count_for(counts);
}

/// Policy trained from a node's stored segments.
inline GaussianHMM policy_from_segments(const std::vector<DemoSegment>& segs, const Settings& cfg) {
  return fit_policy(trajectories_of(segs, cfg.interp_step), state_count_of(segs), cfg.fit);
}

/// Throws ConsistencyError when edges, provenance alignment or traversal
/// paths break the model invariants.
inline void check_consistency(const TaskModel& t) {
  if (!t.contains(t.start_id)) throw ConsistencyError("start node missing");
  if (t.node(t.start_id).policy) throw ConsistencyError("start node carries a policy");
  for (const auto& [u, v] : t.edges)
    if (!t.contains(u) || !t.contains(v))
      throw ConsistencyError("edge " + std::to_string(u) + "->" + std::to_string(v) + " has a dangling endpoint");
  for (const auto& [id, z] : t.nodes) {
    if (z.id != id) throw ConsistencyError("node key/id mismatch at " + std::to_string(id));
    if (z.segments.size() != z.start_states.size())
      throw ConsistencyError("node " + std::to_string(id) + " provenance misaligned");
    if (id != t.start_id && !z.policy) throw ConsistencyError("node " + std::to_string(id) + " has no policy");
    if (id >= t.next_id) throw ConsistencyError("node id beyond next_id");
  }
  for (const auto& rec : t.traversal_log) {
    for (NodeId n : rec.path)
      if (!t.contains(n)) throw ConsistencyError("traversal of " + rec.demo_id + " visits missing node");
    for (std::size_t i = 0; i + 1 < rec.path.size(); ++i)
      if (!t.edges.count({rec.path[i], rec.path[i + 1]}))
        throw ConsistencyError("traversal of " + rec.demo_id + " uses a non-edge");
  }
}

/// Graphviz rendering with deterministic ordering.
inline std::string to_dot(const TaskModel& t) {
  std::ostringstream os;
  os << "digraph task {\n";
  os << "  label=\"kappa=" << t.kappa() << "\";\n";
  os << "  rankdir=LR;\n";
  for (const auto& [id, z] : t.nodes) {
    if (id == t.start_id) {
      os << "  n" << id << " [label=\"start\", shape=doublecircle, style=filled, fillcolor=lightgray];\n";
      continue;
    }
    os << "  n" << id << " [label=\"z" << id << "\\n" << dominant_reference(z) << "\\nsegments=" << z.segments.size()
       << "\", shape=box];\n";
  }
  for (const auto& [u, v] : t.edges) os << "  n" << u << " -> n" << v << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace situ
