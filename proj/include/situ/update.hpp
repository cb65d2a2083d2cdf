#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "situ/classifier.hpp"
#include "situ/demos.hpp"
#include "situ/error.hpp"
#include "situ/hmm.hpp"
#include "situ/task_model.hpp"

namespace situ {

enum class EditKind { node_addition, edge_addition, node_modification };

inline const char* to_string(EditKind k) {
  switch (k) {
    case EditKind::node_addition: return "node_addition";
    case EditKind::edge_addition: return "edge_addition";
    case EditKind::node_modification: return "node_modification";
  }
  return "?";
}

/// One graph edit. For node_modification, nodes[0] is the surviving node and
/// nodes[1..] are the nodes merged into it (empty when only retrained).
struct EditRecord {
  EditKind kind = EditKind::node_addition;
  std::vector<NodeId> nodes;
  std::optional<Edge> edge;
  std::string demo_id;
  std::size_t segment_index = 0;

  friend bool operator==(const EditRecord&, const EditRecord&) = default;
};

/// Counts model refits so locality can be checked from outside.
struct RefitCounters {
  std::size_t policy = 0;
  std::size_t classifier = 0;
  std::size_t query_fits = 0;
  std::size_t distances = 0;

  RefitCounters& operator+=(const RefitCounters& o) {
    policy += o.policy, classifier += o.classifier, query_fits += o.query_fits, distances += o.distances;
    return *this;
  }
};

struct ClusteringResult {
  /// Partition of input indices; each cluster sorted, clusters ordered by
  /// their smallest member.
  std::vector<std::vector<std::size_t>> clusters;
  /// Complete-linkage height of every merge performed, in merge order.
  std::vector<double> linkage;
  double tau = 0.0;
};

/// Agglomerative complete-linkage clustering over a symmetric distance
/// matrix; merging stops once the closest pair of clusters is >= tau apart.
inline ClusteringResult agglomerate(const std::vector<std::vector<double>>& dist, double tau) {
  ClusteringResult r;
  r.tau = tau;
  for (std::size_t i = 0; i < dist.size(); ++i) r.clusters.push_back({i});
  for (;;) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < r.clusters.size(); ++i)
      for (std::size_t j = i + 1; j < r.clusters.size(); ++j) {
        double link = 0.0;
        for (std::size_t p : r.clusters[i])
          for (std::size_t q : r.clusters[j]) link = std::max(link, dist[p][q]);
        if (link < best) best = link, bi = i, bj = j;
      }
    if (r.clusters.size() < 2 || !(best < tau)) break;
    auto& into = r.clusters[bi];
    into.insert(into.end(), r.clusters[bj].begin(), r.clusters[bj].end());
    std::sort(into.begin(), into.end());
    r.clusters.erase(r.clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    r.linkage.push_back(best);
  }
  std::sort(r.clusters.begin(), r.clusters.end());
  return r;
}

/// Policy paired with the key its distance seeds are derived from.
struct PolicyRef {
  std::uint64_t key = 0;
  const GaussianHMM* hmm = nullptr;
};

inline constexpr std::uint64_t kQueryKey = std::numeric_limits<std::uint64_t>::max();

/// Distance with seeds fixed by the unordered key pair, so the value does
/// not depend on evaluation order.
inline double keyed_distance(const PolicyRef& a, const PolicyRef& b, const Settings& cfg) {
  const bool swap = b.key < a.key;
  const PolicyRef& lo = swap ? b : a;
  const PolicyRef& hi = swap ? a : b;
  const std::uint64_t pair = mix_seed(mix_seed(cfg.seed, lo.key), hi.key);
  return hmm_distance(*lo.hmm, *hi.hmm, mix_seed(pair, 0), mix_seed(pair, 1), cfg.distance);
}

inline std::vector<std::vector<double>> distance_matrix(const std::vector<PolicyRef>& refs, const Settings& cfg,
                                                        RefitCounters* counters = nullptr) {
  const std::size_t n = refs.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      d[i][j] = d[j][i] = keyed_distance(refs[i], refs[j], cfg);
      if (counters) ++counters->distances;
    }
  return d;
}

inline std::vector<WorldState> unique_states(const std::vector<WorldState>& in, const std::vector<WorldState>& exclude = {}) {
  std::vector<WorldState> out;
  for (const auto& s : in)
    if (std::find(out.begin(), out.end(), s) == out.end() && std::find(exclude.begin(), exclude.end(), s) == exclude.end())
      out.push_back(s);
  return out;
}

/// Retrains one primitive from the union of a cluster's provenance. The
/// result keeps the lowest constituent id.
inline Primitive merge_primitives(const std::vector<const Primitive*>& members, const Settings& cfg,
                                  RefitCounters* counters = nullptr) {
  Primitive z;
  z.id = members.front()->id;
  std::vector<WorldState> pos, neg;
  for (const auto* m : members) {
    z.id = std::min(z.id, m->id);
    z.segments.insert(z.segments.end(), m->segments.begin(), m->segments.end());
    z.start_states.insert(z.start_states.end(), m->start_states.begin(), m->start_states.end());
    pos.insert(pos.end(), m->classifier.positives.begin(), m->classifier.positives.end());
    neg.insert(neg.end(), m->classifier.negatives.begin(), m->classifier.negatives.end());
  }
  pos = unique_states(pos);
  z.policy = policy_from_segments(z.segments, cfg);
  z.classifier = fit_classifier(pos, unique_states(neg, pos), cfg.classifier);
  if (counters) ++counters->policy, ++counters->classifier;
  return z;
}

/// Clusters the given nodes by policy distance and returns the retrained
/// primitives (singletons pass through untouched) in ascending id order.
inline std::pair<std::vector<Primitive>, ClusteringResult> cluster(const TaskModel& t, const std::vector<NodeId>& zs,
                                                                   const Settings& cfg,
                                                                   RefitCounters* counters = nullptr) {
  std::vector<NodeId> ids = zs;
  std::sort(ids.begin(), ids.end());
  std::vector<PolicyRef> refs;
  for (NodeId id : ids) refs.push_back({id, &*t.node(id).policy});
  auto result = agglomerate(distance_matrix(refs, cfg, counters), cfg.tau);
  std::vector<Primitive> out;
  for (const auto& c : result.clusters) {
    if (c.size() == 1) {
      out.push_back(t.node(ids[c.front()]));
      continue;
    }
    std::vector<const Primitive*> members;
    for (std::size_t i : c) members.push_back(&t.node(ids[i]));
    out.push_back(merge_primitives(members, cfg, counters));
  }
  std::sort(out.begin(), out.end(), [](const Primitive& a, const Primitive& b) { return a.id < b.id; });
  return {std::move(out), std::move(result)};
}

/// Replaces `z_old` by `z_new`, rewriting edges and traversal history through
/// `mapping` (old id -> new id). Returns the mapping for convenience.
inline const std::map<NodeId, NodeId>& local_reconnect(TaskModel& t, const std::vector<NodeId>& z_old,
                                                       std::vector<Primitive> z_new,
                                                       const std::map<NodeId, NodeId>& mapping) {
  const std::set<NodeId> old(z_old.begin(), z_old.end());
  for (NodeId id : old) {
    if (!t.contains(id)) throw InvalidInput("local_reconnect: node " + std::to_string(id) + " not in model");
    if (!mapping.count(id))
      throw ConsistencyError("local_reconnect: node " + std::to_string(id) + " has no new home");
  }
  auto remap = [&](NodeId id) { return old.count(id) ? mapping.at(id) : id; };
  for (NodeId id : old) t.nodes.erase(id);
  for (auto& z : z_new) {
    const NodeId id = z.id;
    t.nodes.insert_or_assign(id, std::move(z));
  }
  std::set<Edge> edges;
  for (const auto& [u, v] : t.edges) edges.insert({remap(u), remap(v)});
  for (const auto& [u, v] : edges)
    if (!t.contains(u) || !t.contains(v)) throw ConsistencyError("local_reconnect: edge endpoint lost");
  t.edges = std::move(edges);
  for (auto& rec : t.traversal_log)
    for (auto& n : rec.path) n = remap(n);
  return mapping;
}

/// Index of the policy whose cluster absorbs the segment's own HMM, or
/// nullopt when the segment ends up in a cluster of its own.
inline std::optional<std::size_t> find_policy(const DemoSegment& d, const std::vector<PolicyRef>& policies,
                                              const Settings& cfg, RefitCounters* counters = nullptr) {
  if (policies.empty()) return std::nullopt;
  const GaussianHMM query = policy_from_segments({d}, cfg);
  if (counters) ++counters->query_fits;
  auto refs = policies;
  refs.push_back({kQueryKey, &query});
  const auto result = agglomerate(distance_matrix(refs, cfg, counters), cfg.tau);
  const std::size_t q = policies.size();
  for (const auto& c : result.clusters) {
    if (std::find(c.begin(), c.end(), q) == c.end()) continue;
    if (c.front() < q) return c.front();
    return std::nullopt;
  }
  return std::nullopt;
}

/// Context threaded through an update so edits and refits are observable.
struct UpdateLog {
  std::vector<EditRecord> edits;
  RefitCounters counters;
  std::string demo_id;
  std::size_t segment_index = 0;
};

inline std::vector<WorldState> start_states_of(const TaskModel& t, const std::set<NodeId>& ids) {
  std::vector<WorldState> out;
  for (NodeId id : ids) {
    const auto& z = t.node(id);
    out.insert(out.end(), z.start_states.begin(), z.start_states.end());
  }
  return out;
}

/// One local update: cluster the applicable set, reconnect, then either add
/// a new primitive for `d` or retrain the primitive it belongs to. Returns
/// the node that now accounts for `d`.
inline NodeId local_update(TaskModel& t, NodeId a, const WorldState& s, const DemoSegment& d,
                           const std::vector<NodeId>& zs, const Settings& cfg, UpdateLog& log) {
  t.node(a);
  for (NodeId z : zs)
    if (z == t.start_id || !t.contains(z)) throw InvalidInput("local_update: applicable set contains invalid node");

  auto [z_new, clustering] = cluster(t, zs, cfg, &log.counters);
  std::map<NodeId, NodeId> mapping;
  {
    std::vector<NodeId> ids = zs;
    std::sort(ids.begin(), ids.end());
    for (const auto& c : clustering.clusters) {
      NodeId home = ids[c.front()];
      for (std::size_t i : c) home = std::min(home, ids[i]);
      std::vector<NodeId> absorbed;
      for (std::size_t i : c) {
        mapping[ids[i]] = home;
        if (ids[i] != home) absorbed.push_back(ids[i]);
      }
      if (!absorbed.empty()) {
        EditRecord rec{EditKind::node_modification, {home}, std::nullopt, log.demo_id, log.segment_index};
        rec.nodes.insert(rec.nodes.end(), absorbed.begin(), absorbed.end());
        log.edits.push_back(std::move(rec));
      }
    }
  }
  std::vector<PolicyRef> policies;
  std::vector<NodeId> new_ids;
  for (const auto& z : z_new) new_ids.push_back(z.id);
  local_reconnect(t, zs, std::move(z_new), mapping);
  if (mapping.count(a)) a = mapping.at(a);
  for (NodeId id : new_ids) policies.push_back({id, &*t.node(id).policy});

  const auto idx = find_policy(d, policies, cfg, &log.counters);
  const auto kids = t.children(a);

  if (!idx) {
    Primitive z;
    z.id = t.next_id;
    z.segments = {d};
    z.start_states = {s};
    z.policy = policy_from_segments(z.segments, cfg);
    z.classifier = fit_classifier({s}, start_states_of(t, {kids.begin(), kids.end()}), cfg.classifier);
    ++log.counters.policy, ++log.counters.classifier;
    const NodeId id = add_node(t, std::move(z));
    log.edits.push_back({EditKind::node_addition, {id}, std::nullopt, log.demo_id, log.segment_index});
    if (add_edge(t, a, id))
      log.edits.push_back({EditKind::edge_addition, {}, Edge{a, id}, log.demo_id, log.segment_index});
    return id;
  }

  const NodeId zid = new_ids[*idx];
  std::set<NodeId> neighbourhood(kids.begin(), kids.end());
  for (NodeId r : t.parents(zid))
    for (NodeId c : t.children(r)) neighbourhood.insert(c);
  neighbourhood.erase(zid);
  Primitive& z = t.node(zid);
  auto own = z.classifier.positives;
  own.push_back(s);
  const auto negatives = unique_states(start_states_of(t, neighbourhood), own);

  z.segments.push_back(d);
  z.start_states.push_back(s);
  z.policy = policy_from_segments(z.segments, cfg);
  z.classifier = update_classifier(z.classifier, {s}, negatives, cfg.classifier);
  ++log.counters.policy, ++log.counters.classifier;
  log.edits.push_back({EditKind::node_modification, {zid}, std::nullopt, log.demo_id, log.segment_index});
  if (add_edge(t, a, zid))
    log.edits.push_back({EditKind::edge_addition, {}, Edge{a, zid}, log.demo_id, log.segment_index});
  return zid;
}

struct SituResult {
  std::vector<EditRecord> edits;
  RefitCounters counters;
  /// Node responsible for each segment, after any later merges.
  std::vector<NodeId> path;
};

/// State-indexed task update over the segments of one demonstration,
/// starting from node `z` (the last executed primitive).
inline SituResult situ(TaskModel& t, NodeId z, const std::vector<WorldState>& states,
                       const std::vector<DemoSegment>& segments, const Settings& cfg, const std::string& demo_id = {}) {
  if (states.size() != segments.size()) throw InvalidInput("situ: state and segment counts differ");
  if (!t.contains(z)) throw InvalidInput("situ: unknown start node " + std::to_string(z));
  SituResult out;
  if (segments.empty()) return out;
  t.traversal_log.push_back({demo_id, {z}});
  const std::size_t rec = t.traversal_log.size() - 1;
  UpdateLog log;
  log.demo_id = demo_id;
  NodeId a = z;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    log.segment_index = i;
    const auto zs = applicable_set(t, states[i], cfg.theta);
    a = local_update(t, a, states[i], segments[i], zs, cfg, log);
    t.traversal_log[rec].path.push_back(a);
  }
  out.edits = std::move(log.edits);
  out.counters = log.counters;
  const auto& path = t.traversal_log[rec].path;
  out.path.assign(path.begin() + 1, path.end());
  return out;
}

/// Convenience: segment a demonstration and run situ from `z`.
inline SituResult situ_demo(TaskModel& t, NodeId z, const Demonstration& demo, const Settings& cfg) {
  if (demo.keyframes.empty()) return {};
  const auto segs = segment_by_reference(demo);
  return situ(t, z, initiation_states(demo, segs), segs, cfg, demo.demo_id);
}

/// Node/edge skeleton of a model, used to replay edit records.
struct Skeleton {
  std::set<NodeId> nodes;
  std::set<Edge> edges;
  friend bool operator==(const Skeleton&, const Skeleton&) = default;
};

inline Skeleton skeleton_of(const TaskModel& t) {
  Skeleton s;
  for (const auto& [id, z] : t.nodes) s.nodes.insert(id);
  s.edges = t.edges;
  return s;
}

inline Skeleton apply_edits(Skeleton s, const std::vector<EditRecord>& edits) {
  for (const auto& e : edits) {
    switch (e.kind) {
      case EditKind::node_addition: s.nodes.insert(e.nodes.at(0)); break;
      case EditKind::edge_addition: s.edges.insert(*e.edge); break;
      case EditKind::node_modification: {
        if (e.nodes.size() < 2) break;
        const NodeId home = e.nodes.front();
        const std::set<NodeId> gone(e.nodes.begin() + 1, e.nodes.end());
        for (NodeId g : gone) s.nodes.erase(g);
        std::set<Edge> edges;
        for (auto [u, v] : s.edges) edges.insert({gone.count(u) ? home : u, gone.count(v) ? home : v});
        s.edges = std::move(edges);
        break;
      }
    }
  }
  return s;
}

namespace detail {

/// Globally clusters `pool`, remaps every traversal record, rebuilds edges
/// from the history and refits every resulting primitive.
inline void rebuild_from_pool(TaskModel& t, std::vector<Primitive> pool, const Settings& cfg, RefitCounters& counters) {
  std::vector<PolicyRef> refs;
  for (const auto& p : pool) refs.push_back({p.id, &*p.policy});
  const auto result = agglomerate(distance_matrix(refs, cfg, &counters), cfg.tau);

  std::map<NodeId, NodeId> mapping;
  std::vector<Primitive> rebuilt;
  for (const auto& c : result.clusters) {
    std::vector<const Primitive*> members;
    for (std::size_t i : c) members.push_back(&pool[i]);
    Primitive m;
    m.id = members.front()->id;
    for (const auto* p : members) {
      m.id = std::min(m.id, p->id);
      m.segments.insert(m.segments.end(), p->segments.begin(), p->segments.end());
      m.start_states.insert(m.start_states.end(), p->start_states.begin(), p->start_states.end());
    }
    for (const auto* p : members) mapping[p->id] = m.id;
    rebuilt.push_back(std::move(m));
  }

  for (auto& rec : t.traversal_log)
    for (auto& n : rec.path)
      if (n != t.start_id) n = mapping.at(n);
  std::set<Edge> edges;
  for (const auto& rec : t.traversal_log)
    for (std::size_t i = 0; i + 1 < rec.path.size(); ++i) edges.insert({rec.path[i], rec.path[i + 1]});

  // Classifiers: positives are a node's start states, negatives the start
  // states of its siblings under every parent.
  std::map<NodeId, Primitive> nodes;
  nodes.emplace(t.start_id, t.node(t.start_id));
  for (auto& m : rebuilt) nodes.emplace(m.id, std::move(m));
  t.nodes = std::move(nodes);
  t.edges = std::move(edges);
  for (auto& [id, m] : t.nodes) {
    if (id == t.start_id) continue;
    std::set<NodeId> sib;
    for (NodeId r : t.parents(id))
      for (NodeId c : t.children(r)) sib.insert(c);
    sib.erase(id);
    const auto pos = unique_states(m.start_states);
    m.policy = policy_from_segments(m.segments, cfg);
    m.classifier = fit_classifier(pos, unique_states(start_states_of(t, sib), pos), cfg.classifier);
    ++counters.policy, ++counters.classifier;
  }
}

/// Appends one single-segment primitive per segment plus the traversal
/// record linking them after `z`.
inline void pool_segments(TaskModel& t, std::vector<Primitive>& pool, NodeId z, const std::vector<WorldState>& states,
                          const std::vector<DemoSegment>& segments, const Settings& cfg, const std::string& demo_id,
                          RefitCounters& counters) {
  if (states.size() != segments.size()) throw InvalidInput("rebuild: state and segment counts differ");
  TraversalRecord fresh{demo_id, {z}};
  for (std::size_t i = 0; i < segments.size(); ++i) {
    Primitive q;
    q.id = t.next_id++;
    q.segments = {segments[i]};
    q.start_states = {states[i]};
    q.policy = policy_from_segments(q.segments, cfg);
    q.classifier = fit_classifier({states[i]}, {}, cfg.classifier);
    ++counters.query_fits;
    fresh.path.push_back(q.id);
    pool.push_back(std::move(q));
  }
  t.traversal_log.push_back(std::move(fresh));
}

}  // namespace detail

/// Full-rebuild comparator: pools every node's provenance plus the new
/// segments, clusters globally, refits every resulting primitive and rebuilds
/// the edge set from the pooled traversal history.
inline RefitCounters rebuild_model(TaskModel& t, NodeId z, const std::vector<WorldState>& states,
                                   const std::vector<DemoSegment>& segments, const Settings& cfg,
                                   const std::string& demo_id = {}) {
  if (states.size() != segments.size()) throw InvalidInput("rebuild_model: state and segment counts differ");
  if (!t.contains(z)) throw InvalidInput("rebuild_model: unknown start node " + std::to_string(z));
  RefitCounters counters;
  std::vector<Primitive> pool;
  for (const auto& [id, p] : t.nodes)
    if (id != t.start_id) pool.push_back(p);
  detail::pool_segments(t, pool, z, states, segments, cfg, demo_id, counters);
  detail::rebuild_from_pool(t, std::move(pool), cfg, counters);
  return counters;
}

/// Batch bootstrap: every demonstration enters from the start node and the
/// model is built by one global clustering over all segments.
inline RefitCounters build_batch(TaskModel& t, const std::vector<Demonstration>& demos, const Settings& cfg) {
  RefitCounters counters;
  std::vector<Primitive> pool;
  for (const auto& [id, p] : t.nodes)
    if (id != t.start_id) pool.push_back(p);
  for (const auto& d : demos) {
    if (d.keyframes.empty()) continue;
    const auto segs = segment_by_reference(d);
    detail::pool_segments(t, pool, t.start_id, initiation_states(d, segs), segs, cfg, d.demo_id, counters);
  }
  if (!pool.empty()) detail::rebuild_from_pool(t, std::move(pool), cfg, counters);
  return counters;
}

}  // namespace situ
