#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "situ/demos.hpp"
#include "situ/error.hpp"
#include "situ/hmm.hpp"
#include "situ/task_model.hpp"

namespace situ {

// ---------------------------------------------------------------------------
// Scenario description

struct ObjectSpec {
  std::string id;
  std::string kind;
  /// Any of: graspable, cover, container, pourer, scoop, source, surface.
  std::set<std::string> traits;
  Pose2 pose;

  bool has(const std::string& trait) const { return traits.count(trait) != 0; }
  friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

/// Predicate over a world. Types: filled, near, far, uncovered, free,
/// not_spilled, loaded.
struct Check {
  std::string type;
  std::string object;
  std::string target;
  double radius = 0.1;

  friend bool operator==(const Check&, const Check&) = default;
};

/// Keyframe template (ee pose relative to `reference`, plus gripper).
struct Skill {
  std::string name;
  std::string reference;
  std::vector<Point4> keyframes;

  friend bool operator==(const Skill&, const Skill&) = default;
};

/// Skills demonstrated together, skipped once `done` holds.
struct Unit {
  std::string name;
  std::vector<std::string> skills;
  std::vector<Check> done;

  friend bool operator==(const Unit&, const Unit&) = default;
};

struct Variant {
  std::string id;
  std::map<std::string, Pose2> poses;  // overrides of the default object poses
  std::vector<std::string> units;

  friend bool operator==(const Variant&, const Variant&) = default;
};

struct Workspace {
  double x_min = -1.5, x_max = 1.5, y_min = -1.0, y_max = 1.0;
  friend bool operator==(const Workspace&, const Workspace&) = default;
};

struct RuleParams {
  double grasp_radius = 0.1;
  double cover_radius = 0.08;
  double collision_radius = 0.08;
  double container_radius = 0.25;
  double tilt_threshold = 0.8;
  double gripper_threshold = 0.5;
  double max_translation = 0.01;  // per simulation tick
  double max_rotation = 0.05;
  double max_gripper = 0.05;
  Workspace workspace{};

  friend bool operator==(const RuleParams&, const RuleParams&) = default;
};

struct Scenario {
  int schema_version = 1;
  std::string name;
  std::vector<ObjectSpec> objects;
  Pose2 ee_home;
  std::map<std::string, Skill> skills;
  std::map<std::string, Unit> units;
  std::vector<Variant> variants;
  std::vector<std::string> teach;
  /// Edit kind name -> variant exercising it.
  std::map<std::string, std::string> modifications;
  std::vector<Check> goal;
  RuleParams rules{};

  LayoutPtr layout() const {
    Layout l;
    for (const auto& o : objects) l.objects.push_back(o.id);
    return std::make_shared<const Layout>(std::move(l));
  }

  const Variant& variant(const std::string& id) const {
    for (const auto& v : variants)
      if (v.id == id) return v;
    throw InvalidInput("scenario " + name + ": unknown variant " + id);
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Throws InvalidInput when names do not resolve.
inline void validate(const Scenario& sc) {
  if (sc.objects.empty()) throw InvalidInput("scenario " + sc.name + ": no objects");
  std::set<std::string> ids;
  for (const auto& o : sc.objects)
    if (!ids.insert(o.id).second) throw InvalidInput("scenario " + sc.name + ": duplicate object " + o.id);
  auto need_object = [&](const std::string& id, const std::string& where) {
    if (!ids.count(id)) throw MissingObject(where + ": unknown object " + id);
  };
  for (const auto& [name, sk] : sc.skills) {
    need_object(sk.reference, "skill " + name);
    if (sk.keyframes.empty()) throw InvalidInput("skill " + name + ": no keyframes");
  }
  auto check_checks = [&](const std::vector<Check>& cs, const std::string& where) {
    static const std::set<std::string> types{"filled", "near", "far", "uncovered", "free", "not_spilled", "loaded"};
    for (const auto& c : cs) {
      if (!types.count(c.type)) throw InvalidInput(where + ": unknown check " + c.type);
      if (!c.object.empty()) need_object(c.object, where);
      if (!c.target.empty()) need_object(c.target, where);
    }
  };
  for (const auto& [name, u] : sc.units) {
    for (const auto& s : u.skills)
      if (!sc.skills.count(s)) throw InvalidInput("unit " + name + ": unknown skill " + s);
    check_checks(u.done, "unit " + name);
  }
  check_checks(sc.goal, "goal");
  for (const auto& v : sc.variants) {
    for (const auto& [id, p] : v.poses) need_object(id, "variant " + v.id);
    for (const auto& u : v.units)
      if (!sc.units.count(u)) throw InvalidInput("variant " + v.id + ": unknown unit " + u);
  }
  for (const auto& id : sc.teach) sc.variant(id);
  for (const auto& [kind, id] : sc.modifications) sc.variant(id);
}

// ---------------------------------------------------------------------------
// World and rules

struct World {
  LayoutPtr layout;
  std::shared_ptr<const std::vector<ObjectSpec>> specs;
  RuleParams rules{};
  std::vector<Pose2> poses;
  Pose2 ee;
  double gripper = 0.0;
  std::optional<std::size_t> held;
  Pose2 grip;  // held object in the ee frame
  std::set<std::string> filled;
  bool spilled = false;
  bool loaded = false;
  std::optional<std::string> fault;

  WorldState state() const { return capture_world(layout, poses, ee, gripper); }

  std::size_t index(const std::string& id) const {
    return layout->index_of(id);
  }
  const Pose2& pose(const std::string& id) const { return poses[index(id)]; }
  bool has(std::size_t i, const std::string& trait) const { return (*specs)[i].has(trait); }
  const std::string& id(std::size_t i) const { return layout->objects[i]; }
};

inline World make_world(const Scenario& sc, const Variant* variant = nullptr) {
  World w;
  w.layout = sc.layout();
  w.specs = std::make_shared<const std::vector<ObjectSpec>>(sc.objects);
  w.rules = sc.rules;
  for (const auto& o : sc.objects) w.poses.push_back(o.pose);
  if (variant)
    for (const auto& [id, p] : variant->poses) w.poses[w.index(id)] = p;
  w.ee = sc.ee_home;
  return w;
}

namespace detail {

inline double planar(const Pose2& a, const Pose2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Nearest object (other than held) with `trait` within `radius` of `at`.
inline std::optional<std::size_t> nearest(const World& w, const Pose2& at, const std::string& trait, double radius,
                                          std::optional<std::size_t> skip = std::nullopt) {
  std::optional<std::size_t> best;
  double bd = radius;
  for (std::size_t i = 0; i < w.poses.size(); ++i) {
    if (i == w.held || i == skip || !w.has(i, trait)) continue;
    const double d = planar(w.poses[i], at);
    if (d <= bd) best = i, bd = d;
  }
  return best;
}

inline std::optional<std::size_t> cover_on(const World& w, std::size_t i) {
  return nearest(w, w.poses[i], "cover", w.rules.cover_radius, i);
}

inline void on_tilt(World& w) {
  if (!w.held) return;
  const std::size_t tool = *w.held;
  const auto c = nearest(w, w.ee, "container", w.rules.container_radius);
  if (w.has(tool, "pourer")) {
    if (!c) {
      w.spilled = true;
      w.fault = "spilled: poured with no container under " + w.id(tool);
      return;
    }
    if (const auto cov = cover_on(w, *c)) {
      w.fault = "blocked: poured onto " + w.id(*cov) + " covering " + w.id(*c);
      return;
    }
    w.filled.insert(w.id(*c));
  } else if (w.has(tool, "scoop")) {
    if (!c) {
      if (w.loaded) {
        w.spilled = true, w.loaded = false;
        w.fault = "spilled: dumped with no container under " + w.id(tool);
      }
      return;
    }
    if (const auto cov = cover_on(w, *c)) {
      w.fault = "blocked: scooped into " + w.id(*cov) + " covering " + w.id(*c);
      return;
    }
    if (w.has(*c, "source")) {
      if (!w.loaded) w.loaded = true;
    } else if (w.loaded) {
      w.filled.insert(w.id(*c));
      w.loaded = false;
    }
  }
}

inline void on_close(World& w) {
  const auto i = nearest(w, w.ee, "graspable", w.rules.grasp_radius);
  if (!i) return;
  if (const auto cov = cover_on(w, *i)) {
    w.fault = "blocked: " + w.id(*i) + " is covered by " + w.id(*cov);
    return;
  }
  w.held = i;
  w.grip = relative_to(w.ee, w.poses[*i]);
}

inline void on_open(World& w) {
  if (!w.held) return;
  const std::size_t i = *w.held;
  w.held.reset();
  if (const auto j = nearest(w, w.poses[i], "graspable", w.rules.collision_radius, i))
    w.fault = "collision: " + w.id(i) + " released onto " + w.id(*j);
}

/// One tick: move, then apply every rule whose threshold was crossed.
inline void tick(World& w, const Pose2& ee, double gripper) {
  const double g0 = w.gripper, th0 = std::abs(w.ee.theta);
  w.ee = ee;
  w.gripper = gripper;
  if (w.held) w.poses[*w.held] = compose(w.ee, w.grip);
  const auto& ws = w.rules.workspace;
  if (ee.x < ws.x_min || ee.x > ws.x_max || ee.y < ws.y_min || ee.y > ws.y_max) {
    w.fault = "unreachable: end effector left the workspace";
    return;
  }
  const double gt = w.rules.gripper_threshold;
  if (g0 < gt && gripper >= gt) on_close(w);
  else if (g0 >= gt && gripper < gt) on_open(w);
  if (w.fault) return;
  const double tt = w.rules.tilt_threshold, th1 = std::abs(w.ee.theta);
  if (th0 < tt && th1 >= tt) on_tilt(w);
}

}  // namespace detail

/// Moves the end effector to `target` with the gripper driven to `gripper`,
/// in small ticks. A faulted world does not move.
inline World& step_to(World& w, const Pose2& target, double gripper) {
  if (w.fault) return w;
  gripper = std::clamp(gripper, 0.0, 1.0);
  const Pose2 from = w.ee;
  const double g0 = w.gripper;
  const double dth = shortest_arc(from.theta, target.theta);
  const auto& r = w.rules;
  const double n = std::max({1.0, std::ceil(detail::planar(from, target) / r.max_translation),
                             std::ceil(std::abs(dth) / r.max_rotation), std::ceil(std::abs(gripper - g0) / r.max_gripper)});
  const int ticks = static_cast<int>(n);
  for (int k = 1; k <= ticks && !w.fault; ++k) {
    const double t = double(k) / n;
    const Pose2 p = k == ticks ? Pose2{target.x, target.y, wrap_angle(target.theta)}
                               : Pose2{from.x + t * (target.x - from.x), from.y + t * (target.y - from.y),
                                       wrap_angle(from.theta + t * dth)};
    detail::tick(w, p, k == ticks ? gripper : g0 + t * (gripper - g0));
  }
  return w;
}

inline bool holds(const Check& c, const World& w) {
  if (c.type == "filled") return w.filled.count(c.object) != 0;
  if (c.type == "near") return detail::planar(w.pose(c.object), w.pose(c.target)) <= c.radius;
  if (c.type == "far") return detail::planar(w.pose(c.object), w.pose(c.target)) > c.radius;
  if (c.type == "uncovered") return !detail::cover_on(w, w.index(c.object));
  if (c.type == "free") return !w.held;
  if (c.type == "not_spilled") return !w.spilled;
  if (c.type == "loaded") return w.loaded;
  throw InvalidInput("unknown check " + c.type);
}

inline bool holds(const std::vector<Check>& cs, const World& w) {
  return std::all_of(cs.begin(), cs.end(), [&](const Check& c) { return holds(c, w); });
}

inline bool goal_met(const Scenario& sc, const World& w) { return !w.fault && holds(sc.goal, w); }

// ---------------------------------------------------------------------------
// Scripted demonstrator

struct DemoOptions {
  double sigma = 0.003;  // position noise; angles get half of it
  std::uint64_t seed = 0;
};

/// Demonstrates every unfinished unit of `variant` from `w`, which is
/// advanced in place. Keyframes record the world reached at each pose.
inline Demonstration demonstrate(const Scenario& sc, World& w, const Variant& variant, DemoKind kind,
                                 std::string demo_id, const DemoOptions& opt = {}) {
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Demonstration d;
  d.demo_id = std::move(demo_id);
  d.kind = kind;
  d.initial_world = w.state();
  std::int64_t ts = 0;
  for (const auto& uname : variant.units) {
    const Unit& u = sc.units.at(uname);
    if (holds(u.done, w)) continue;
    for (const auto& sname : u.skills) {
      const Skill& sk = sc.skills.at(sname);
      const Pose2 frame = w.pose(sk.reference);
      for (const auto& k : sk.keyframes) {
        const Pose2 rel{k[0] + opt.sigma * noise(rng), k[1] + opt.sigma * noise(rng),
                        k[2] + 0.5 * opt.sigma * noise(rng)};
        step_to(w, compose(frame, rel), k[3]);
        if (w.fault) throw ConsistencyError("demonstration " + d.demo_id + " faulted: " + *w.fault);
        d.keyframes.push_back({w.ee, w.gripper, sk.reference, w.state(), ts++});
      }
    }
  }
  return d;
}

inline Demonstration generate_demo(const Scenario& sc, const std::string& variant_id, const std::string& demo_id,
                                   const DemoOptions& opt = {}) {
  const Variant& v = sc.variant(variant_id);
  World w = make_world(sc, &v);
  return demonstrate(sc, w, v, DemoKind::full, demo_id, opt);
}

// ---------------------------------------------------------------------------
// Execution

struct ExecutionEvent {
  enum class Kind { node_entered, keyframe, selection_failure, fault, terminal };
  Kind kind = Kind::node_entered;
  NodeId node = 0;
  Pose2 target;
  double gripper = 0.0;
  std::string detail;
};

inline const char* to_string(ExecutionEvent::Kind k) {
  switch (k) {
    case ExecutionEvent::Kind::node_entered: return "node_entered";
    case ExecutionEvent::Kind::keyframe: return "keyframe";
    case ExecutionEvent::Kind::selection_failure: return "selection_failure";
    case ExecutionEvent::Kind::fault: return "fault";
    case ExecutionEvent::Kind::terminal: return "terminal";
  }
  return "?";
}

struct ExecOptions {
  double theta = 0.5;
  std::uint64_t seed = 0;
  std::size_t max_steps = 30;
  std::function<void(const ExecutionEvent&)> observer;
};

struct ExecutionTrace {
  enum class Outcome { success, failure };
  Outcome outcome = Outcome::failure;
  /// Nodes executed in order, the start node first.
  std::vector<NodeId> visited;
  std::vector<std::vector<Pose2>> plans;
  std::string reason;
  NodeId failure_node = 0;
  WorldState failure_state;
  World final_world;
  /// Last node boundary with an empty gripper: where a correction resumes.
  NodeId resume_node = 0;
  World resume_world;

  bool success() const { return outcome == Outcome::success; }
};

/// Runs the task model in the simulator from `w` until a terminal node,
/// a selection failure, a fault or the step budget.
inline ExecutionTrace execute(const TaskModel& t, World w, const Scenario& sc, const ExecOptions& opt = {}) {
  ExecutionTrace tr;
  auto emit = [&](ExecutionEvent e) {
    if (opt.observer) opt.observer(e);
  };
  NodeId current = t.start_id;
  tr.visited.push_back(current);
  tr.resume_node = current;
  tr.resume_world = w;
  auto fail = [&](std::string reason, NodeId at) {
    tr.outcome = ExecutionTrace::Outcome::failure;
    tr.reason = std::move(reason);
    tr.failure_node = at;
    tr.failure_state = w.state();
  };
  for (std::size_t step = 0;; ++step) {
    if (step >= opt.max_steps) {
      fail("step budget exhausted", current);
      break;
    }
    const auto sel = select_next(t, current, w.state(), opt.theta);
    if (sel.kind == Selection::Kind::terminal) {
      emit({ExecutionEvent::Kind::terminal, current, w.ee, w.gripper, ""});
      if (goal_met(sc, w)) {
        tr.outcome = ExecutionTrace::Outcome::success;
        tr.reason = "terminal";
        tr.failure_node = current;
      } else {
        fail("terminal without goal", current);
      }
      break;
    }
    if (sel.kind == Selection::Kind::failure) {
      emit({ExecutionEvent::Kind::selection_failure, current, w.ee, w.gripper, "no child activated"});
      fail("no child activated", current);
      break;
    }
    const NodeId z = sel.node;
    const Primitive& p = t.node(z);
    tr.visited.push_back(z);
    emit({ExecutionEvent::Kind::node_entered, z, w.ee, w.gripper, dominant_reference(p)});
    const Pose2 frame = w.pose(dominant_reference(p));
    const auto kfs = sample_keyframes(*p.policy, mix_seed(opt.seed, step));
    std::vector<Pose2> plan;
    for (const auto& k : kfs) {
      const Pose2 target = compose(frame, {k[0], k[1], k[2]});
      plan.push_back(target);
      step_to(w, target, k[3]);
      emit({ExecutionEvent::Kind::keyframe, z, target, std::clamp(k[3], 0.0, 1.0), ""});
      if (w.fault) break;
    }
    tr.plans.push_back(std::move(plan));
    if (w.fault) {
      emit({ExecutionEvent::Kind::fault, z, w.ee, w.gripper, *w.fault});
      fail(*w.fault, z);
      break;
    }
    current = z;
    if (!w.held) tr.resume_node = current, tr.resume_world = w;
  }
  tr.final_world = std::move(w);
  return tr;
}

}  // namespace situ
