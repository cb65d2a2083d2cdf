#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "situ/demos.hpp"
#include "situ/error.hpp"
#include "situ/simulator.hpp"
#include "situ/task_model.hpp"
#include "situ/update.hpp"

namespace situ::io {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Reading with located errors

/// Cursor into a parsed document; every failure names its JSON pointer.
class At {
 public:
  At(const json& j, std::string path = "") : j_(&j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return *j_; }
  [[noreturn]] void fail(const std::string& what) const {
    throw LoadError((path_.empty() ? std::string("/") : path_) + ": " + what);
  }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }
  At operator[](const std::string& key) const {
    if (!j_->is_object()) fail("expected object");
    auto it = j_->find(key);
    if (it == j_->end()) fail("missing field '" + key + "'");
    return {*it, path_ + "/" + key};
  }
  At operator[](std::size_t i) const {
    if (!j_->is_array()) fail("expected array");
    if (i >= j_->size()) fail("index " + std::to_string(i) + " out of range");
    return {(*j_)[i], path_ + "/" + std::to_string(i)};
  }
  std::size_t size() const {
    if (!j_->is_array()) fail("expected array");
    return j_->size();
  }
  bool is_null() const { return j_->is_null(); }

  double num() const {
    if (!j_->is_number()) fail("expected number");
    return j_->get<double>();
  }
  std::uint64_t uint() const {
    if (!j_->is_number_unsigned() && !(j_->is_number_integer() && j_->get<std::int64_t>() >= 0))
      fail("expected non-negative integer");
    return j_->get<std::uint64_t>();
  }
  std::int64_t integer() const {
    if (!j_->is_number_integer()) fail("expected integer");
    return j_->get<std::int64_t>();
  }
  bool boolean() const {
    if (!j_->is_boolean()) fail("expected boolean");
    return j_->get<bool>();
  }
  std::string str() const {
    if (!j_->is_string()) fail("expected string");
    return j_->get<std::string>();
  }
  std::vector<double> nums() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].num());
    return out;
  }
  std::vector<std::string> strs() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].str());
    return out;
  }
  template <class F>
  auto each(F f) const {
    std::vector<decltype(f(std::declval<At>()))> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(f((*this)[i]));
    return out;
  }
  /// Object entries in document order.
  std::vector<std::pair<std::string, At>> entries() const {
    if (!j_->is_object()) fail("expected object");
    std::vector<std::pair<std::string, At>> out;
    for (auto it = j_->begin(); it != j_->end(); ++it) out.push_back({it.key(), At(*it, path_ + "/" + it.key())});
    return out;
  }

 private:
  const json* j_;
  std::string path_;
};

inline json parse(const std::string& text, const std::string& source = "input") {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw LoadError(source + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

inline void check_schema(const At& doc) {
  const auto v = doc["schema_version"].integer();
  if (v != kSchemaVersion)
    doc["schema_version"].fail("unsupported schema version " + std::to_string(v));
}

/// Canonical text: two-space indent, shortest round-trip doubles, newline.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  out << text;
  if (!out) throw InvalidInput("write failed for " + path);
}

// ---------------------------------------------------------------------------
// Small values

inline json to_json(const Pose2& p) { return json::array({p.x, p.y, p.theta}); }
inline Pose2 pose_from(const At& a) {
  if (a.size() != 3) a.fail("pose needs 3 numbers");
  return {a[0].num(), a[1].num(), a[2].num()};
}

inline json to_json(const Point4& p) { return json::array({p[0], p[1], p[2], p[3]}); }
inline Point4 point_from(const At& a) {
  if (a.size() != 4) a.fail("expected 4 numbers");
  return {a[0].num(), a[1].num(), a[2].num(), a[3].num()};
}

inline json to_json(const std::vector<double>& v) {
  json j = json::array();
  for (double x : v) j.push_back(x);
  return j;
}

template <class Row>
inline json matrix(const std::vector<Row>& m) {
  json j = json::array();
  for (const auto& r : m) j.push_back(json(r));
  return j;
}

inline std::vector<std::vector<double>> matrix_from(const At& a) {
  return a.each([](const At& r) { return r.nums(); });
}

/// World features; the layout is carried by the enclosing document.
inline WorldState state_from(const At& a, const LayoutPtr& layout) {
  WorldState s{layout, a.nums()};
  if (s.features.size() != layout->dim())
    a.fail("expected " + std::to_string(layout->dim()) + " features, got " + std::to_string(s.features.size()));
  return s;
}

inline json layout_json(const Layout& l) {
  json j = json::array();
  for (const auto& o : l.objects) j.push_back(o);
  return j;
}

inline LayoutPtr layout_from(const At& a) {
  Layout l{a.strs()};
  for (std::size_t i = 0; i < l.objects.size(); ++i)
    for (std::size_t k = 0; k < i; ++k)
      if (l.objects[i] == l.objects[k]) a[i].fail("duplicate object " + l.objects[i]);
  return std::make_shared<const Layout>(std::move(l));
}

// ---------------------------------------------------------------------------
// Demonstrations

inline json to_json(const Keyframe& k) {
  json j;
  j["ee"] = to_json(k.ee_pose);
  j["gripper"] = k.gripper;
  j["reference"] = k.reference_object;
  j["world"] = to_json(k.world.features);
  j["timestamp"] = k.timestamp;
  return j;
}

inline Keyframe keyframe_from(const At& a, const LayoutPtr& layout) {
  Keyframe k;
  k.ee_pose = pose_from(a["ee"]);
  k.gripper = a["gripper"].num();
  k.reference_object = a["reference"].str();
  if (!layout->contains(k.reference_object)) a["reference"].fail("unknown object " + k.reference_object);
  k.world = state_from(a["world"], layout);
  k.timestamp = a["timestamp"].integer();
  return k;
}

inline const char* to_string(DemoKind k) { return k == DemoKind::full ? "full" : "corrective"; }

inline json demo_json(const Demonstration& d, const Layout& layout, const std::string& scenario = "") {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["scenario"] = scenario;
  j["demo_id"] = d.demo_id;
  j["kind"] = to_string(d.kind);
  j["layout"] = layout_json(layout);
  j["initial_world"] = d.initial_world ? to_json(d.initial_world->features) : json(nullptr);
  j["keyframes"] = json::array();
  for (const auto& k : d.keyframes) j["keyframes"].push_back(to_json(k));
  return j;
}

struct DemoFile {
  std::string scenario;
  LayoutPtr layout;
  Demonstration demo;
};

inline DemoFile demo_from(const At& doc) {
  check_schema(doc);
  DemoFile f;
  f.scenario = doc["scenario"].str();
  f.layout = layout_from(doc["layout"]);
  f.demo.demo_id = doc["demo_id"].str();
  const auto kind = doc["kind"].str();
  if (kind == "full") f.demo.kind = DemoKind::full;
  else if (kind == "corrective") f.demo.kind = DemoKind::corrective;
  else doc["kind"].fail("unknown demonstration kind " + kind);
  if (doc.has("initial_world") && !doc["initial_world"].is_null())
    f.demo.initial_world = state_from(doc["initial_world"], f.layout);
  f.demo.keyframes = doc["keyframes"].each([&](const At& k) { return keyframe_from(k, f.layout); });
  return f;
}

inline DemoFile load_demo(const std::string& path) {
  const auto j = parse(read_file(path), path);
  return demo_from(At(j));
}

inline void save_demo(const std::string& path, const Demonstration& d, const Layout& layout,
                      const std::string& scenario = "") {
  write_file(path, dump(demo_json(d, layout, scenario)));
}

// ---------------------------------------------------------------------------
// Models

inline json to_json(const GaussianHMM& h) {
  json j;
  j["initial"] = to_json(h.initial);
  j["transitions"] = matrix(h.transitions);
  j["means"] = matrix(h.means);
  j["variances"] = matrix(h.variances);
  return j;
}

inline GaussianHMM hmm_from(const At& a) {
  GaussianHMM h;
  h.initial = a["initial"].nums();
  h.transitions = matrix_from(a["transitions"]);
  h.means = a["means"].each(point_from);
  h.variances = a["variances"].each(point_from);
  const std::size_t k = h.means.size();
  if (k == 0) a.fail("policy has no states");
  if (h.initial.size() != k || h.transitions.size() != k || h.variances.size() != k) a.fail("state counts disagree");
  for (std::size_t i = 0; i < k; ++i) {
    if (h.transitions[i].size() != k) a["transitions"][i].fail("row length mismatch");
    for (double v : h.variances[i])
      if (!(v > 0)) a["variances"][i].fail("variance must be positive");
  }
  return h;
}

inline json to_json(const InitiationClassifier& c) {
  json j;
  j["weights"] = to_json(c.weights);
  j["bias"] = c.bias;
  j["degenerate"] = c.degenerate;
  j["positives"] = json::array();
  for (const auto& s : c.positives) j["positives"].push_back(to_json(s.features));
  j["negatives"] = json::array();
  for (const auto& s : c.negatives) j["negatives"].push_back(to_json(s.features));
  return j;
}

inline InitiationClassifier classifier_from(const At& a, const LayoutPtr& layout) {
  InitiationClassifier c;
  c.weights = a["weights"].nums();
  if (c.weights.size() != layout->dim()) a["weights"].fail("weight count does not match layout");
  c.bias = a["bias"].num();
  c.degenerate = a["degenerate"].boolean();
  c.positives = a["positives"].each([&](const At& s) { return state_from(s, layout); });
  c.negatives = a["negatives"].each([&](const At& s) { return state_from(s, layout); });
  return c;
}

inline json to_json(const DemoSegment& s) {
  json j;
  j["demo_id"] = s.demo_id;
  j["position"] = s.position;
  j["reference"] = s.reference_object;
  j["keyframes"] = json::array();
  for (const auto& k : s.keyframes) j["keyframes"].push_back(to_json(k));
  return j;
}

inline DemoSegment segment_from(const At& a, const LayoutPtr& layout) {
  DemoSegment s;
  s.demo_id = a["demo_id"].str();
  s.position = a["position"].uint();
  s.reference_object = a["reference"].str();
  s.keyframes = a["keyframes"].each([&](const At& k) { return keyframe_from(k, layout); });
  if (s.keyframes.empty()) a["keyframes"].fail("segment has no keyframes");
  for (std::size_t i = 0; i < s.keyframes.size(); ++i)
    if (s.keyframes[i].reference_object != s.reference_object)
      a["keyframes"][i].fail("keyframe reference differs from segment reference");
  s.start_state = s.keyframes.front().world;
  return s;
}

inline json to_json(const Primitive& z) {
  json j;
  j["id"] = z.id;
  j["policy"] = z.policy ? to_json(*z.policy) : json(nullptr);
  j["classifier"] = to_json(z.classifier);
  j["segments"] = json::array();
  for (const auto& s : z.segments) j["segments"].push_back(to_json(s));
  j["start_states"] = json::array();
  for (const auto& s : z.start_states) j["start_states"].push_back(to_json(s.features));
  return j;
}

inline Primitive primitive_from(const At& a, const LayoutPtr& layout) {
  Primitive z;
  z.id = a["id"].uint();
  if (!a["policy"].is_null()) z.policy = hmm_from(a["policy"]);
  z.classifier = classifier_from(a["classifier"], layout);
  z.segments = a["segments"].each([&](const At& s) { return segment_from(s, layout); });
  z.start_states = a["start_states"].each([&](const At& s) { return state_from(s, layout); });
  return z;
}

inline json model_json(const TaskModel& t) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["layout"] = layout_json(*t.layout);
  j["start_id"] = t.start_id;
  j["next_id"] = t.next_id;
  j["nodes"] = json::array();
  for (const auto& [id, z] : t.nodes) j["nodes"].push_back(to_json(z));
  j["edges"] = json::array();
  for (const auto& [u, v] : t.edges) j["edges"].push_back(json::array({u, v}));
  j["traversal_log"] = json::array();
  for (const auto& r : t.traversal_log) {
    json e;
    e["demo_id"] = r.demo_id;
    e["path"] = json::array();
    for (NodeId n : r.path) e["path"].push_back(n);
    j["traversal_log"].push_back(std::move(e));
  }
  return j;
}

/// Parses a model and checks its invariants (ConsistencyError on violation).
inline TaskModel model_from(const At& doc) {
  check_schema(doc);
  TaskModel t;
  t.layout = layout_from(doc["layout"]);
  t.start_id = doc["start_id"].uint();
  t.next_id = doc["next_id"].uint();
  const auto nodes = doc["nodes"];
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto z = primitive_from(nodes[i], t.layout);
    const NodeId id = z.id;
    if (!t.nodes.emplace(id, std::move(z)).second) nodes[i]["id"].fail("duplicate node id");
  }
  const auto edges = doc["edges"];
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].size() != 2) edges[i].fail("edge needs two endpoints");
    t.edges.insert({edges[i][0].uint(), edges[i][1].uint()});
  }
  t.traversal_log = doc["traversal_log"].each([](const At& r) {
    TraversalRecord rec;
    rec.demo_id = r["demo_id"].str();
    rec.path = r["path"].each([](const At& n) { return NodeId(n.uint()); });
    return rec;
  });
  check_consistency(t);
  return t;
}

inline std::string model_text(const TaskModel& t) { return dump(model_json(t)); }

inline TaskModel load_model(const std::string& path) {
  const auto j = parse(read_file(path), path);
  return model_from(At(j));
}

inline void save_model(const std::string& path, const TaskModel& t) { write_file(path, model_text(t)); }

// ---------------------------------------------------------------------------
// Edit logs and counters

inline json to_json(const EditRecord& e) {
  json j;
  j["kind"] = to_string(e.kind);
  j["nodes"] = json::array();
  for (NodeId n : e.nodes) j["nodes"].push_back(n);
  j["edge"] = e.edge ? json::array({e.edge->first, e.edge->second}) : json(nullptr);
  j["demo_id"] = e.demo_id;
  j["segment_index"] = e.segment_index;
  return j;
}

inline EditRecord edit_from(const At& a) {
  EditRecord e;
  const auto kind = a["kind"].str();
  if (kind == "node_addition") e.kind = EditKind::node_addition;
  else if (kind == "edge_addition") e.kind = EditKind::edge_addition;
  else if (kind == "node_modification") e.kind = EditKind::node_modification;
  else a["kind"].fail("unknown edit kind " + kind);
  e.nodes = a["nodes"].each([](const At& n) { return NodeId(n.uint()); });
  if (!a["edge"].is_null()) e.edge = Edge{a["edge"][0].uint(), a["edge"][1].uint()};
  e.demo_id = a["demo_id"].str();
  e.segment_index = a["segment_index"].uint();
  return e;
}

inline json to_json(const RefitCounters& c) {
  json j;
  j["policy"] = c.policy;
  j["classifier"] = c.classifier;
  j["query_fits"] = c.query_fits;
  j["distances"] = c.distances;
  return j;
}

inline json edits_json(const std::vector<EditRecord>& edits, const RefitCounters& counters) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["edits"] = json::array();
  for (const auto& e : edits) j["edits"].push_back(to_json(e));
  j["refit_counts"] = to_json(counters);
  return j;
}

inline std::vector<EditRecord> edits_from(const At& doc) {
  check_schema(doc);
  return doc["edits"].each(edit_from);
}

// ---------------------------------------------------------------------------
// Scenarios

inline json to_json(const Check& c) {
  json j;
  j["type"] = c.type;
  if (!c.object.empty()) j["object"] = c.object;
  if (!c.target.empty()) j["target"] = c.target;
  if (c.type == "near" || c.type == "far") j["radius"] = c.radius;
  return j;
}

inline Check check_from(const At& a) {
  Check c;
  c.type = a["type"].str();
  if (a.has("object")) c.object = a["object"].str();
  if (a.has("target")) c.target = a["target"].str();
  if (a.has("radius")) c.radius = a["radius"].num();
  return c;
}

inline json to_json(const RuleParams& r) {
  json j;
  j["grasp_radius"] = r.grasp_radius;
  j["cover_radius"] = r.cover_radius;
  j["collision_radius"] = r.collision_radius;
  j["container_radius"] = r.container_radius;
  j["tilt_threshold"] = r.tilt_threshold;
  j["gripper_threshold"] = r.gripper_threshold;
  j["max_translation"] = r.max_translation;
  j["max_rotation"] = r.max_rotation;
  j["max_gripper"] = r.max_gripper;
  j["workspace"] = json::array({r.workspace.x_min, r.workspace.x_max, r.workspace.y_min, r.workspace.y_max});
  return j;
}

inline RuleParams rules_from(const At& a) {
  RuleParams r;
  auto opt = [&](const char* key, double& v) {
    if (a.has(key)) v = a[key].num();
  };
  opt("grasp_radius", r.grasp_radius);
  opt("cover_radius", r.cover_radius);
  opt("collision_radius", r.collision_radius);
  opt("container_radius", r.container_radius);
  opt("tilt_threshold", r.tilt_threshold);
  opt("gripper_threshold", r.gripper_threshold);
  opt("max_translation", r.max_translation);
  opt("max_rotation", r.max_rotation);
  opt("max_gripper", r.max_gripper);
  if (a.has("workspace")) {
    const auto w = a["workspace"].nums();
    if (w.size() != 4) a["workspace"].fail("workspace needs [x_min, x_max, y_min, y_max]");
    r.workspace = {w[0], w[1], w[2], w[3]};
  }
  if (!(r.max_translation > 0 && r.max_rotation > 0 && r.max_gripper > 0)) a.fail("tick sizes must be positive");
  return r;
}

inline json scenario_json(const Scenario& sc) {
  json j;
  j["schema_version"] = sc.schema_version;
  j["name"] = sc.name;
  j["rules"] = to_json(sc.rules);
  j["ee_home"] = to_json(sc.ee_home);
  j["objects"] = json::array();
  for (const auto& o : sc.objects) {
    json e;
    e["id"] = o.id;
    e["kind"] = o.kind;
    e["traits"] = json::array();
    for (const auto& t : o.traits) e["traits"].push_back(t);
    e["pose"] = to_json(o.pose);
    j["objects"].push_back(std::move(e));
  }
  j["skills"] = json::object();
  for (const auto& [name, s] : sc.skills) {
    json e;
    e["reference"] = s.reference;
    e["keyframes"] = json::array();
    for (const auto& k : s.keyframes) e["keyframes"].push_back(to_json(k));
    j["skills"][name] = std::move(e);
  }
  j["units"] = json::object();
  for (const auto& [name, u] : sc.units) {
    json e;
    e["skills"] = u.skills;
    e["done"] = json::array();
    for (const auto& c : u.done) e["done"].push_back(to_json(c));
    j["units"][name] = std::move(e);
  }
  j["variants"] = json::array();
  for (const auto& v : sc.variants) {
    json e;
    e["id"] = v.id;
    e["poses"] = json::object();
    for (const auto& [id, p] : v.poses) e["poses"][id] = to_json(p);
    e["units"] = v.units;
    j["variants"].push_back(std::move(e));
  }
  j["teach"] = sc.teach;
  j["modifications"] = json::object();
  for (const auto& [k, v] : sc.modifications) j["modifications"][k] = v;
  j["goal"] = json::array();
  for (const auto& c : sc.goal) j["goal"].push_back(to_json(c));
  return j;
}

inline Scenario scenario_from(const At& doc) {
  check_schema(doc);
  Scenario sc;
  sc.name = doc["name"].str();
  if (doc.has("rules")) sc.rules = rules_from(doc["rules"]);
  sc.ee_home = pose_from(doc["ee_home"]);
  sc.objects = doc["objects"].each([](const At& o) {
    ObjectSpec s;
    s.id = o["id"].str();
    s.kind = o["kind"].str();
    for (const auto& t : o["traits"].strs()) s.traits.insert(t);
    s.pose = pose_from(o["pose"]);
    return s;
  });
  for (const auto& [name, s] : doc["skills"].entries())
    sc.skills[name] = Skill{name, s["reference"].str(), s["keyframes"].each(point_from)};
  for (const auto& [name, u] : doc["units"].entries())
    sc.units[name] = Unit{name, u["skills"].strs(), u["done"].each(check_from)};
  sc.variants = doc["variants"].each([](const At& v) {
    Variant out;
    out.id = v["id"].str();
    if (v.has("poses"))
      for (const auto& [id, p] : v["poses"].entries()) out.poses[id] = pose_from(p);
    out.units = v["units"].strs();
    return out;
  });
  sc.teach = doc["teach"].strs();
  if (doc.has("modifications"))
    for (const auto& [k, v] : doc["modifications"].entries()) {
      if (k != "node_addition" && k != "edge_addition" && k != "node_modification")
        v.fail("unknown edit kind " + k);
      sc.modifications[k] = v.str();
    }
  sc.goal = doc["goal"].each(check_from);
  try {
    validate(sc);
  } catch (const InvalidInput& e) {
    throw LoadError(std::string("scenario: ") + e.what());
  }
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  const auto j = parse(read_file(path), path);
  return scenario_from(At(j));
}

/// Shipped scenario by name ("pour", "scoop") or by file path.
inline Scenario find_scenario(const std::string& name_or_path) {
  if (name_or_path.find('/') != std::string::npos || name_or_path.find(".json") != std::string::npos)
    return load_scenario(name_or_path);
#ifdef SITU_SCENARIO_DIR
  std::ifstream probe(std::string(SITU_SCENARIO_DIR) + "/" + name_or_path + ".json");
  if (probe) return load_scenario(std::string(SITU_SCENARIO_DIR) + "/" + name_or_path + ".json");
#endif
  throw InvalidInput("unknown scenario " + name_or_path);
}

// ---------------------------------------------------------------------------
// Execution traces

inline json trace_json(const ExecutionTrace& tr) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["outcome"] = tr.success() ? "success" : "failure";
  j["reason"] = tr.reason;
  j["visited"] = tr.visited;
  j["plans"] = json::array();
  for (const auto& plan : tr.plans) {
    json p = json::array();
    for (const auto& pose : plan) p.push_back(to_json(pose));
    j["plans"].push_back(std::move(p));
  }
  j["failure_node"] = tr.failure_node;
  j["failure_state"] = to_json(tr.failure_state.features);
  j["resume_node"] = tr.resume_node;
  j["resume_state"] = to_json(tr.resume_world.state().features);
  return j;
}

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  std::string scenario;
  Settings settings{};
  double sigma = 0.003;
  std::vector<std::uint64_t> seeds;

  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    const auto& x = a.settings;
    const auto& y = b.settings;
    return a.scenario == b.scenario && a.sigma == b.sigma && a.seeds == b.seeds && x.theta == y.theta &&
           x.tau == y.tau && x.interp_step == y.interp_step && x.seed == y.seed &&
           x.fit.tolerance == y.fit.tolerance && x.fit.max_iterations == y.fit.max_iterations &&
           x.classifier.l2 == y.classifier.l2 && x.classifier.tolerance == y.classifier.tolerance &&
           x.classifier.max_iterations == y.classifier.max_iterations &&
           x.classifier.min_scale == y.classifier.min_scale &&
           x.distance.num_sequences == y.distance.num_sequences;
  }
};

inline json config_json(const RunConfig& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["scenario"] = c.scenario;
  j["theta"] = c.settings.theta;
  j["tau"] = c.settings.tau;
  j["interp_step"] = c.settings.interp_step;
  j["seed"] = c.settings.seed;
  j["sigma"] = c.sigma;
  j["seeds"] = c.seeds;
  j["em"] = {{"tolerance", c.settings.fit.tolerance}, {"max_iterations", c.settings.fit.max_iterations}};
  j["classifier"] = {{"l2", c.settings.classifier.l2},
                     {"tolerance", c.settings.classifier.tolerance},
                     {"max_iterations", c.settings.classifier.max_iterations},
                     {"min_scale", c.settings.classifier.min_scale}};
  j["distance"] = {{"num_sequences", c.settings.distance.num_sequences}};
  return j;
}

inline RunConfig config_from(const At& doc) {
  check_schema(doc);
  RunConfig c;
  c.scenario = doc["scenario"].str();
  c.settings.theta = doc["theta"].num();
  c.settings.tau = doc["tau"].num();
  c.settings.interp_step = doc["interp_step"].num();
  c.settings.seed = doc["seed"].uint();
  c.sigma = doc["sigma"].num();
  c.seeds = doc["seeds"].each([](const At& s) { return s.uint(); });
  c.settings.fit.tolerance = doc["em"]["tolerance"].num();
  c.settings.fit.max_iterations = doc["em"]["max_iterations"].uint();
  c.settings.classifier.l2 = doc["classifier"]["l2"].num();
  c.settings.classifier.tolerance = doc["classifier"]["tolerance"].num();
  c.settings.classifier.max_iterations = doc["classifier"]["max_iterations"].uint();
  c.settings.classifier.min_scale = doc["classifier"]["min_scale"].num();
  c.settings.distance.num_sequences = doc["distance"]["num_sequences"].uint();
  return c;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

/// Hash of the canonical config text.
inline std::string config_hash(const RunConfig& c) { return hex(fnv1a(config_json(c).dump())); }

}  // namespace situ::io
