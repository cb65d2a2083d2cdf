#pragma once

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "situ/update.hpp"

/// Synthetic models for timing one corrective update against a full rebuild.
namespace situ::bench {

/// A start node fanning out to `kappa` primitives over a layout of `kappa`
/// objects. Primitive i is taught when object i sits displaced from its home
/// slot and moves relative to object i along its own keyframe shape, so every
/// pair of primitives is far apart both in policy and in start state.
struct Synthetic {
  TaskModel model;
  /// Correction: taught from the start node at `state`, close to
  /// primitive `target`'s own start states and shape.
  NodeId target = 0;
  WorldState state;
  DemoSegment segment;
};

inline std::string object_name(std::size_t i) { return "o" + std::to_string(i); }

inline LayoutPtr synthetic_layout(std::size_t kappa) {
  Layout l;
  for (std::size_t i = 0; i < kappa; ++i) l.objects.push_back(object_name(i));
  return std::make_shared<const Layout>(std::move(l));
}

/// Object poses with object `moved` displaced from its slot.
inline std::vector<Pose2> scene(std::size_t kappa, std::size_t moved, std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<Pose2> poses;
  for (std::size_t j = 0; j < kappa; ++j) {
    Pose2 p{-1.0 + 2.0 * double(j) / double(kappa), 0.5, 0.0};
    if (j == moved) p.y -= 0.5;
    p.x += n(rng), p.y += n(rng);
    poses.push_back(p);
  }
  return poses;
}

/// Relative keyframe shape of primitive `i`: a short grasp-like stroke whose
/// offset is unique per primitive (0.2 grid spacing). Stroke lengths sit
/// between multiples of the interpolation step so noise cannot change the
/// interpolated point count.
inline std::vector<Point4> shape(std::size_t i) {
  const double u = -1.0 + 0.2 * double(i % 10), v = -1.0 + 0.2 * double(i / 10);
  return {{u, v, 0.0, 0.0}, {u, v + 0.15, 0.0, 1.0}, {u + 0.15, v + 0.15, 0.0, 1.0}};
}

inline DemoSegment noisy_segment(const LayoutPtr& layout, const std::vector<Pose2>& poses, std::size_t i,
                                 std::mt19937_64& rng, double sigma, const std::string& demo_id) {
  std::normal_distribution<double> n(0.0, sigma);
  DemoSegment seg;
  seg.reference_object = object_name(i);
  seg.demo_id = demo_id;
  std::int64_t ts = 0;
  for (const auto& p : shape(i)) {
    const Pose2 ee = compose(poses[i], {p[0] + n(rng), p[1] + n(rng), p[2] + 0.5 * n(rng)});
    seg.keyframes.push_back({ee, p[3], seg.reference_object, capture_world(layout, poses, ee, p[3]), ts++});
  }
  seg.start_state = seg.keyframes.front().world;
  return seg;
}

/// Builds the synthetic model with `demos` segments per primitive.
inline Synthetic synthetic_model(std::size_t kappa, const Settings& cfg, std::uint64_t seed, std::size_t demos = 2) {
  if (kappa < 2) throw InvalidInput("synthetic_model: need at least two primitives");
  const double sigma = 0.003;
  std::mt19937_64 rng(seed);
  Synthetic out{make_task_model(synthetic_layout(kappa)), 0, {}, {}};
  TaskModel& t = out.model;
  const Pose2 home{0.0, -0.6, 0.0};
  std::vector<Primitive> prims;
  for (std::size_t i = 0; i < kappa; ++i) {
    Primitive z;
    z.id = NodeId(i + 1);
    for (std::size_t k = 0; k < demos; ++k) {
      const auto poses = scene(kappa, i, rng, sigma);
      const std::string id = "syn/" + std::to_string(i) + "/" + std::to_string(k);
      z.segments.push_back(noisy_segment(t.layout, poses, i, rng, sigma, id));
      z.start_states.push_back(capture_world(t.layout, poses, home, 0.0));
    }
    z.policy = policy_from_segments(z.segments, cfg);
    prims.push_back(std::move(z));
  }
  for (std::size_t i = 0; i < kappa; ++i) {
    std::vector<WorldState> negatives;
    for (std::size_t j = 0; j < kappa; ++j)
      if (j != i) negatives.insert(negatives.end(), prims[j].start_states.begin(), prims[j].start_states.end());
    prims[i].classifier = fit_classifier(prims[i].start_states, negatives, cfg.classifier);
  }
  for (auto& z : prims) {
    const NodeId id = add_node(t, z);
    add_edge(t, t.start_id, id);
    for (const auto& s : z.segments) t.traversal_log.push_back({s.demo_id, {t.start_id, id}});
  }
  const std::size_t target = 1;
  const auto poses = scene(kappa, target, rng, sigma);
  out.target = NodeId(target + 1);
  out.state = capture_world(t.layout, poses, home, 0.0);
  out.segment = noisy_segment(t.layout, poses, target, rng, sigma, "syn/correction");
  return out;
}

struct Row {
  std::size_t kappa = 0;
  std::size_t applicable = 0;
  RefitCounters local;
  RefitCounters rebuild;
  double local_ms = 0.0;
  double rebuild_ms = 0.0;
  double ratio() const { return rebuild_ms > 0 ? local_ms / rebuild_ms : 0.0; }
};

/// Times one corrective update both ways; the best of `repeats` runs.
inline Row measure(std::size_t kappa, const Settings& cfg, std::uint64_t seed, std::size_t repeats = 3) {
  using clock = std::chrono::steady_clock;
  const Synthetic syn = synthetic_model(kappa, cfg, seed);
  Row row;
  row.kappa = kappa;
  row.applicable = applicable_set(syn.model, syn.state, cfg.theta).size();
  row.local_ms = row.rebuild_ms = 1e300;
  for (std::size_t r = 0; r < repeats; ++r) {
    TaskModel a = syn.model;
    auto t0 = clock::now();
    const auto res = situ::situ(a, a.start_id, {syn.state}, {syn.segment}, cfg, "syn/correction");
    auto t1 = clock::now();
    row.local = res.counters;
    row.local_ms = std::min(row.local_ms, std::chrono::duration<double, std::milli>(t1 - t0).count());

    TaskModel b = syn.model;
    t0 = clock::now();
    row.rebuild = rebuild_model(b, b.start_id, {syn.state}, {syn.segment}, cfg, "syn/correction");
    t1 = clock::now();
    row.rebuild_ms = std::min(row.rebuild_ms, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return row;
}

}  // namespace situ::bench
