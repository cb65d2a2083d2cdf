#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "situ/error.hpp"

namespace situ {

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(a, two_pi);
  if (w <= -std::numbers::pi) w += two_pi;
  if (w > std::numbers::pi) w -= two_pi;
  return w;
}

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  friend bool operator==(const Pose2&, const Pose2&) = default;
};

/// `child` expressed in the frame of `frame`.
inline Pose2 relative_to(const Pose2& frame, const Pose2& child) {
  const double c = std::cos(frame.theta), s = std::sin(frame.theta);
  const double dx = child.x - frame.x, dy = child.y - frame.y;
  return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(child.theta - frame.theta)};
}

/// Inverse of relative_to: maps a pose given in `frame` to the workspace.
inline Pose2 compose(const Pose2& frame, const Pose2& local) {
  const double c = std::cos(frame.theta), s = std::sin(frame.theta);
  return {frame.x + c * local.x - s * local.y, frame.y + s * local.x + c * local.y,
          wrap_angle(frame.theta + local.theta)};
}

/// Ordered object identifiers defining the feature slots of a WorldState.
/// Each object contributes (x, y, theta) of the object in the end-effector
/// frame; the gripper scalar comes last.
struct Layout {
  std::vector<std::string> objects;

  std::size_t dim() const { return 3 * objects.size() + 1; }

  std::size_t index_of(const std::string& id) const {
    auto it = std::find(objects.begin(), objects.end(), id);
    if (it == objects.end()) throw MissingObject("object '" + id + "' not in layout");
    return static_cast<std::size_t>(it - objects.begin());
  }

  bool contains(const std::string& id) const {
    return std::find(objects.begin(), objects.end(), id) != objects.end();
  }

  friend bool operator==(const Layout&, const Layout&) = default;
};

using LayoutPtr = std::shared_ptr<const Layout>;

struct WorldState {
  LayoutPtr layout;
  std::vector<double> features;

  std::size_t dim() const { return features.size(); }
  double gripper() const { return features.back(); }

  /// Pose of an object in the end-effector frame.
  Pose2 object_in_ee(const std::string& id) const {
    const std::size_t i = 3 * layout->index_of(id);
    return {features[i], features[i + 1], features[i + 2]};
  }

  friend bool operator==(const WorldState& a, const WorldState& b) {
    if (a.features != b.features) return false;
    if (a.layout == b.layout) return true;
    return a.layout && b.layout && *a.layout == *b.layout;
  }
};

/// Builds the feature vector from absolute object and end-effector poses.
/// `poses` is aligned with layout->objects.
inline WorldState capture_world(const LayoutPtr& layout, const std::vector<Pose2>& poses,
                                const Pose2& ee, double gripper) {
  if (poses.size() != layout->objects.size())
    throw InvalidInput("capture_world: pose count does not match layout");
  WorldState w{layout, {}};
  w.features.reserve(layout->dim());
  for (const auto& p : poses) {
    const Pose2 r = relative_to(ee, p);
    w.features.insert(w.features.end(), {r.x, r.y, r.theta});
  }
  w.features.push_back(gripper);
  return w;
}

struct Keyframe {
  Pose2 ee_pose;
  double gripper = 0.0;
  std::string reference_object;
  WorldState world;
  std::int64_t timestamp = 0;

  friend bool operator==(const Keyframe&, const Keyframe&) = default;
};

enum class DemoKind { full, corrective };

struct Demonstration {
  std::string demo_id;
  DemoKind kind = DemoKind::full;
  std::vector<Keyframe> keyframes;
  /// World before the first keyframe, when the recorder captured it.
  std::optional<WorldState> initial_world;

  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

struct DemoSegment {
  std::vector<Keyframe> keyframes;
  std::string reference_object;
  WorldState start_state;
  std::string demo_id;
  std::size_t position = 0;

  friend bool operator==(const DemoSegment&, const DemoSegment&) = default;
};

/// Relative keyframe feature: (dx, dy, dtheta, gripper).
using Point4 = std::array<double, 4>;
using Trajectory = std::vector<Point4>;

/// Splits a demonstration wherever the annotated reference object changes.
inline std::vector<DemoSegment> segment_by_reference(const Demonstration& demo) {
  if (demo.keyframes.empty()) throw InvalidInput("segment_by_reference: empty demonstration");
  std::vector<DemoSegment> out;
  for (const auto& kf : demo.keyframes) {
    if (out.empty() || out.back().reference_object != kf.reference_object) {
      DemoSegment seg;
      seg.reference_object = kf.reference_object;
      seg.start_state = kf.world;
      seg.demo_id = demo.demo_id;
      seg.position = out.size();
      out.push_back(std::move(seg));
    }
    out.back().keyframes.push_back(kf);
  }
  return out;
}

/// End-effector pose and gripper in the reference object's frame, computed
/// from the captured world features.
inline Point4 relative_keyframe(const Keyframe& kf) {
  if (!kf.world.layout || !kf.world.layout->contains(kf.reference_object))
    throw MissingObject("reference object '" + kf.reference_object + "' not in world");
  const Pose2 obj = kf.world.object_in_ee(kf.reference_object);
  // Inverse of obj-in-ee gives ee-in-obj.
  const Pose2 ee = relative_to(obj, Pose2{0.0, 0.0, 0.0});
  return {ee.x, ee.y, ee.theta, kf.gripper};
}

/// Shortest signed arc from a to b; an exact half turn resolves to +pi.
inline double shortest_arc(double a, double b) { return wrap_angle(b - a); }

/// Linear interpolation between relative keyframes; spacing is measured in
/// the planar position (dx, dy) and never exceeds `step`.
inline Trajectory interpolate_segment(const DemoSegment& seg, double step) {
  if (!(step > 0.0)) throw InvalidInput("interpolate_segment: step must be positive");
  Trajectory out;
  if (seg.keyframes.empty()) return out;
  std::vector<Point4> rel;
  rel.reserve(seg.keyframes.size());
  for (const auto& kf : seg.keyframes) rel.push_back(relative_keyframe(kf));
  for (std::size_t k = 0; k + 1 < rel.size(); ++k) {
    const Point4& p = rel[k];
    const Point4& q = rel[k + 1];
    const double dist = std::hypot(q[0] - p[0], q[1] - p[1]);
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(dist / step - 1e-12)));
    const double arc = shortest_arc(p[2], q[2]);
    out.push_back(p);
    for (std::size_t j = 1; j < n; ++j) {
      const double t = static_cast<double>(j) / static_cast<double>(n);
      out.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]), wrap_angle(p[2] + t * arc),
                     p[3] + t * (q[3] - p[3])});
    }
  }
  out.push_back(rel.back());
  return out;
}

/// State each segment is initiated from: the demonstration's initial world
/// for the first segment (first keyframe's world if absent), otherwise the
/// world at the previous segment's last keyframe.
inline std::vector<WorldState> initiation_states(const Demonstration& demo, const std::vector<DemoSegment>& segs) {
  std::vector<WorldState> out;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (i == 0)
      out.push_back(demo.initial_world ? *demo.initial_world : segs[0].start_state);
    else
      out.push_back(segs[i - 1].keyframes.back().world);
  }
  return out;
}

}  // namespace situ
