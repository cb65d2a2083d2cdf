#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "situ/demos.hpp"
#include "situ/task_model.hpp"

namespace fixture {

using namespace situ;

/// Two objects at the origin; world features are set directly.
inline LayoutPtr layout() {
  static const LayoutPtr l = std::make_shared<const Layout>(Layout{{"cup", "bowl"}});
  return l;
}

/// World whose features are all `v` except the first, which is `tag`.
inline WorldState world(double tag, double v = 0.0) {
  std::vector<double> f(layout()->dim(), v);
  f[0] = tag;
  return {layout(), f};
}

/// Segment whose keyframes follow `shape` (relative ee poses + gripper)
/// about `ref`, with small Gaussian jitter.
inline DemoSegment segment(const std::string& ref, const std::vector<std::array<double, 4>>& shape,
                           std::uint64_t seed, double noise = 0.003, std::string demo_id = "d") {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, noise);
  DemoSegment s;
  s.reference_object = ref;
  s.demo_id = std::move(demo_id);
  for (const auto& k : shape) {
    const Pose2 ee{k[0] + n(rng), k[1] + n(rng), k[2] + 0.5 * n(rng)};
    std::vector<Pose2> objs(layout()->objects.size(), Pose2{});
    Keyframe kf{ee, k[3], ref, capture_world(layout(), objs, ee, k[3]), 0};
    s.keyframes.push_back(std::move(kf));
  }
  s.start_state = s.keyframes.front().world;
  return s;
}

inline const std::vector<std::array<double, 4>>& shape_a() {
  static const std::vector<std::array<double, 4>> s{{0, -0.15, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 1}};
  return s;
}
inline const std::vector<std::array<double, 4>>& shape_b() {
  static const std::vector<std::array<double, 4>> s{{0.15, 0, 1, 1}, {0.15, 0, 0, 1}, {0.3, 0.1, 0, 0}};
  return s;
}
inline const std::vector<std::array<double, 4>>& shape_c() {
  static const std::vector<std::array<double, 4>> s{{-0.15, 0.15, 0, 1}, {-0.15, 0, 0, 1}, {-0.15, 0, 0, 0}, {0, 0, 0, 0}};
  return s;
}

inline Settings settings() { return Settings{}; }

/// Primitive trained on `n` jittered copies of `shape`.
inline Primitive primitive(NodeId id, const std::vector<std::array<double, 4>>& shape, const std::string& ref,
                           std::vector<WorldState> pos, std::vector<WorldState> neg, std::uint64_t seed = 1) {
  Primitive z;
  z.id = id;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    z.segments.push_back(segment(ref, shape, seed * 100 + i));
    z.start_states.push_back(pos[i]);
  }
  z.policy = policy_from_segments(z.segments, settings());
  z.classifier = fit_classifier(pos, neg);
  return z;
}

}  // namespace fixture
