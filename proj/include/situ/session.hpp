#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "situ/io.hpp"
#include "situ/teaching.hpp"

/// Teaching-session protocol, transport independent. Every outgoing message
/// is {"session", "seq", "type", "body"}; seq starts at 1 and increases by one
/// per message across the whole session.
namespace situ::session {

using io::json;

inline json pose_json(const Pose2& p) { return {{"x", p.x}, {"y", p.y}, {"theta", p.theta}}; }

inline Pose2 pose_body(const io::At& a) { return {a["x"].num(), a["y"].num(), a["theta"].num()}; }

inline json world_json(const World& w) {
  json j;
  j["features"] = w.state().features;
  j["ee"] = pose_json(w.ee);
  j["gripper"] = w.gripper;
  j["objects"] = json::object();
  for (std::size_t i = 0; i < w.poses.size(); ++i) j["objects"][w.id(i)] = pose_json(w.poses[i]);
  j["held"] = w.held ? json(w.id(*w.held)) : json(nullptr);
  j["filled"] = json::array();
  for (const auto& f : w.filled) j["filled"].push_back(f);
  j["spilled"] = w.spilled;
  j["loaded"] = w.loaded;
  j["fault"] = w.fault ? json(*w.fault) : json(nullptr);
  return j;
}

class Session {
 public:
  /// Opens a session on `sc` with `model` (a fresh start-only model when
  /// absent). The opening messages are in log().
  Session(std::string id, Scenario sc, const std::string& variant, Settings cfg,
          std::optional<TaskModel> model = std::nullopt)
      : id_(std::move(id)),
        sc_(std::move(sc)),
        cfg_(cfg),
        model_(model ? std::move(*model) : make_task_model(sc_.layout())) {
    if (*model_.layout != *sc_.layout()) throw InvalidInput("model layout does not match scenario " + sc_.name);
    reset(variant);
    emit("session.start", {{"scenario", sc_.name}, {"variant", variant_}, {"objects", io::layout_json(*sc_.layout())}});
    emit("world.state", world_json(world_));
    emit("model.graph", {{"dot", to_dot(model_)}});
  }

  const std::string& id() const { return id_; }
  const TaskModel& model() const { return model_; }
  const World& world() const { return world_; }
  /// Every message emitted so far, in seq order.
  const std::vector<json>& log() const { return log_; }
  std::uint64_t last_seq() const { return seq_; }
  /// Node a corrective commit will update from, set by a failed execution.
  std::optional<NodeId> correction_node() const { return correction_; }

  /// Handles one request {"type", "body"?, "seq"?} and returns the messages
  /// it produced. A request seq, when present, must exceed the previous one.
  /// Protocol errors become "error" messages; the session stays usable.
  std::vector<json> handle(const json& request) {
    const std::size_t first = log_.size();
    try {
      const io::At req(request);
      if (req.has("seq")) {
        const auto s = req["seq"].uint();
        if (client_seq_ && s <= *client_seq_) req["seq"].fail("sequence number " + std::to_string(s) + " not increasing");
        client_seq_ = s;
      }
      const std::string type = req["type"].str();
      const json empty = json::object();
      const io::At body = req.has("body") ? req["body"] : io::At(empty, "/body");
      dispatch(type, body);
    } catch (const LoadError& e) {
      emit("error", {{"message", e.what()}});
    } catch (const InvalidInput& e) {
      emit("error", {{"message", e.what()}});
    } catch (const ConsistencyError& e) {
      emit("error", {{"message", e.what()}});
    }
    return {log_.begin() + static_cast<std::ptrdiff_t>(first), log_.end()};
  }

 private:
  void dispatch(const std::string& type, const io::At& body) {
    if (type == "world.state") {
      emit("world.state", world_json(world_));
    } else if (type == "world.reset") {
      reset(body.has("variant") ? body["variant"].str() : variant_);
      emit("world.state", world_json(world_));
    } else if (type == "demo.keyframe") {
      keyframe(body);
    } else if (type == "demo.undo") {
      undo();
    } else if (type == "demo.commit") {
      commit(body);
    } else if (type == "exec.start") {
      exec(body);
    } else if (type == "model.graph") {
      emit("model.graph", {{"dot", to_dot(model_)}});
    } else {
      throw InvalidInput("unknown message type '" + type + "'");
    }
  }

  void reset(const std::string& variant) {
    world_ = make_world(sc_, &sc_.variant(variant));
    variant_ = variant;
    pending_.clear();
    history_.clear();
    pending_start_.reset();
    correction_.reset();
  }

  void keyframe(const io::At& body) {
    const Pose2 pose = pose_body(body["pose"]);
    const double gripper = body["gripper"].num();
    const std::string ref = body["reference"].str();
    if (!sc_.layout()->contains(ref)) body["reference"].fail("unknown object " + ref);
    if (world_.fault) throw InvalidInput("world is faulted (" + *world_.fault + "); reset it first");
    if (pending_.empty()) pending_start_ = world_;
    history_.push_back(world_);
    step_to(world_, pose, gripper);
    pending_.push_back({world_.ee, world_.gripper, ref, world_.state(), std::int64_t(pending_.size())});
    emit("world.state", world_json(world_));
  }

  /// Drops the last uncommitted keyframe and restores the world before it.
  void undo() {
    if (pending_.empty()) throw InvalidInput("no uncommitted keyframe to undo");
    pending_.pop_back();
    world_ = history_.back();
    history_.pop_back();
    emit("world.state", world_json(world_));
  }

  void commit(const io::At& body) {
    const std::string kind = body["kind"].str();
    Demonstration d;
    d.demo_id = id_ + "/" + std::to_string(++commits_);
    NodeId from = model_.start_id;
    if (kind == "full") {
      d.kind = DemoKind::full;
    } else if (kind == "corrective") {
      if (!correction_) body["kind"].fail("no failed execution to correct");
      d.kind = DemoKind::corrective;
      from = *correction_;
    } else {
      body["kind"].fail("unknown demonstration kind " + kind);
    }
    if (pending_.empty()) throw InvalidInput("no keyframes to commit");
    d.keyframes = pending_;
    d.initial_world = pending_start_->state();
    // Work on a copy so a throwing update leaves the model and the pending
    // keyframes untouched.
    TaskModel next = model_;
    const auto r = situ_demo(next, from, d, cfg_);
    check_consistency(next);
    model_ = std::move(next);
    pending_.clear();
    history_.clear();
    correction_.reset();
    json edits = json::array();
    for (const auto& e : r.edits) edits.push_back(io::to_json(e));
    emit("model.update_result", {{"demo_id", d.demo_id},
                                 {"edits", std::move(edits)},
                                 {"refit_counts", io::to_json(r.counters)},
                                 {"demo", io::demo_json(d, *sc_.layout(), sc_.name)}});
    emit("model.graph", {{"dot", to_dot(model_)}});
  }

  void exec(const io::At& body) {
    if (!pending_.empty()) throw InvalidInput("commit or undo the pending keyframes first");
    const std::uint64_t seed = body.has("seed") ? body["seed"].uint() : 0;
    reset(body.has("variant") ? body["variant"].str() : variant_);
    ExecOptions opt;
    opt.theta = cfg_.theta;
    opt.seed = seed;
    opt.observer = [&](const ExecutionEvent& e) {
      switch (e.kind) {
        case ExecutionEvent::Kind::node_entered:
          emit("exec.event", {{"event", "node_entered"}, {"node", e.node}, {"reference", e.detail}});
          break;
        case ExecutionEvent::Kind::keyframe:
          emit("exec.event",
               {{"event", "keyframe_reached"}, {"node", e.node}, {"pose", pose_json(e.target)}, {"gripper", e.gripper}});
          break;
        default:
          break;
      }
    };
    const auto tr = execute(model_, world_, sc_, opt);
    if (tr.success()) {
      world_ = tr.final_world;
      emit("exec.event", {{"event", "success"}, {"node", tr.failure_node}, {"visited", tr.visited}});
    } else {
      // Corrections resume from the last boundary with an empty gripper.
      world_ = tr.resume_world;
      correction_ = tr.resume_node;
      emit("exec.event", {{"event", "failure"},
                          {"node", tr.failure_node},
                          {"state", tr.failure_state.features},
                          {"reason", tr.reason},
                          {"resume_node", tr.resume_node},
                          {"resume_state", tr.resume_world.state().features}});
    }
    emit("world.state", world_json(world_));
  }

  void emit(const std::string& type, json body) {
    json m;
    m["session"] = id_;
    m["seq"] = ++seq_;
    m["type"] = type;
    m["body"] = std::move(body);
    log_.push_back(std::move(m));
  }

  std::string id_;
  Scenario sc_;
  Settings cfg_;
  TaskModel model_;
  std::string variant_;
  World world_;
  std::vector<Keyframe> pending_;
  std::vector<World> history_;
  std::optional<World> pending_start_;
  std::optional<NodeId> correction_;
  std::optional<std::uint64_t> client_seq_;
  std::uint64_t seq_ = 0;
  std::size_t commits_ = 0;
  std::vector<json> log_;
};

}  // namespace situ::session
