#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "situ/demos.hpp"

using namespace situ;

namespace {

LayoutPtr layout_of(std::vector<std::string> ids) { return std::make_shared<const Layout>(Layout{std::move(ids)}); }

Keyframe make_kf(const LayoutPtr& layout, const std::vector<Pose2>& objects, Pose2 ee, double gripper, std::string ref,
                 std::int64_t ts = 0) {
  return {ee, gripper, std::move(ref), capture_world(layout, objects, ee, gripper), ts};
}

Demonstration demo_with_refs(const std::vector<std::string>& refs) {
  auto layout = layout_of({"a", "b", "c", "cup", "bowl"});
  std::vector<Pose2> objs(5);
  Demonstration d{"d0", DemoKind::full, {}};
  for (std::size_t i = 0; i < refs.size(); ++i)
    d.keyframes.push_back(make_kf(layout, objs, {0.1 * double(i), 0, 0}, 0, refs[i], std::int64_t(i)));
  return d;
}

std::vector<std::size_t> sizes(const std::vector<DemoSegment>& segs) {
  std::vector<std::size_t> out;
  for (const auto& s : segs) out.push_back(s.keyframes.size());
  return out;
}

}  // namespace

TEST(Angles, WrapIntoHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_angle(std::numbers::pi), std::numbers::pi);
  EXPECT_DOUBLE_EQ(wrap_angle(-std::numbers::pi), std::numbers::pi);
  EXPECT_NEAR(wrap_angle(3 * std::numbers::pi / 2), -std::numbers::pi / 2, 1e-12);
  EXPECT_DOUBLE_EQ(shortest_arc(0.0, std::numbers::pi), std::numbers::pi);
}

TEST(Segmentation, UniformReferenceGivesOneSegment) {
  const auto segs = segment_by_reference(demo_with_refs({"cup", "cup", "cup"}));
  EXPECT_EQ(sizes(segs), (std::vector<std::size_t>{3}));
}

TEST(Segmentation, SplitsAtEveryChange) {
  EXPECT_EQ(sizes(segment_by_reference(demo_with_refs({"cup", "cup", "bowl", "bowl", "cup"}))),
            (std::vector<std::size_t>{2, 2, 1}));
  EXPECT_EQ(sizes(segment_by_reference(demo_with_refs({"a", "b", "c"}))), (std::vector<std::size_t>{1, 1, 1}));
}

TEST(Segmentation, EmptyDemoRejected) {
  EXPECT_THROW(segment_by_reference(Demonstration{}), InvalidInput);
}

TEST(Segmentation, PartitionPropertyAndIdempotence) {
  std::mt19937 rng(3);
  const std::vector<std::string> pool{"a", "b", "c"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> refs;
    const int n = 1 + int(rng() % 12);
    for (int i = 0; i < n; ++i) refs.push_back(pool[rng() % 3]);
    const auto demo = demo_with_refs(refs);
    const auto segs = segment_by_reference(demo);
    std::vector<Keyframe> joined;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const auto& s = segs[i];
      EXPECT_EQ(s.start_state, s.keyframes.front().world);
      EXPECT_EQ(s.position, i);
      for (const auto& kf : s.keyframes) EXPECT_EQ(kf.reference_object, s.reference_object);
      if (i > 0) EXPECT_NE(segs[i - 1].reference_object, s.reference_object);
      joined.insert(joined.end(), s.keyframes.begin(), s.keyframes.end());
      // Re-segmenting a uniform segment is a no-op.
      const auto again = segment_by_reference(Demonstration{"x", DemoKind::full, s.keyframes});
      ASSERT_EQ(again.size(), 1u);
      EXPECT_EQ(again.front().keyframes, s.keyframes);
    }
    EXPECT_EQ(joined, demo.keyframes);
  }
}

TEST(RelativeKeyframe, CoincidentFramesGiveZero) {
  auto layout = layout_of({"cup"});
  const auto kf = make_kf(layout, {{0.4, -0.2, 0.3}}, {0.4, -0.2, 0.3}, 0.0, "cup");
  const auto r = relative_keyframe(kf);
  for (double v : r) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(RelativeKeyframe, TranslationOnly) {
  auto layout = layout_of({"cup"});
  const auto r = relative_keyframe(make_kf(layout, {{0.5, 0.5, 0.0}}, {1.5, 0.5, 0.0}, 1.0, "cup"));
  EXPECT_NEAR(r[0], 1.0, 1e-12);
  EXPECT_NEAR(r[1], 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(r[3], 1.0);
}

TEST(RelativeKeyframe, RotatedObjectMatchesComposedTransforms) {
  // Oracle: apply the inverse rigid transform of the object by hand.
  auto layout = layout_of({"cup"});
  const double th = std::numbers::pi / 2;
  const auto r = relative_keyframe(make_kf(layout, {{0.0, 0.0, th}}, {1.0, 0.0, 0.0}, 0.0, "cup"));
  const double ox = std::cos(-th) * 1.0 - std::sin(-th) * 0.0;
  const double oy = std::sin(-th) * 1.0 + std::cos(-th) * 0.0;
  EXPECT_NEAR(r[0], ox, 1e-12);
  EXPECT_NEAR(r[1], oy, 1e-12);
  EXPECT_NEAR(r[0], 0.0, 1e-12);
  EXPECT_NEAR(r[1], -1.0, 1e-12);
  EXPECT_NEAR(r[2], -th, 1e-12);
}

TEST(RelativeKeyframe, UnknownReferenceObject) {
  auto layout = layout_of({"cup"});
  auto kf = make_kf(layout, {{0, 0, 0}}, {0, 0, 0}, 0, "bowl");
  EXPECT_THROW(relative_keyframe(kf), MissingObject);
}

TEST(RelativeKeyframe, InvariantUnderSharedRigidTransform) {
  auto layout = layout_of({"cup", "bowl"});
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0), a(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const Pose2 cup{u(rng), u(rng), a(rng)}, bowl{u(rng), u(rng), a(rng)}, ee{u(rng), u(rng), a(rng)};
    const Pose2 g{u(rng), u(rng), a(rng)};
    const auto r1 = relative_keyframe(make_kf(layout, {cup, bowl}, ee, 0.3, "cup"));
    const auto r2 = relative_keyframe(make_kf(layout, {compose(g, cup), compose(g, bowl)}, compose(g, ee), 0.3, "cup"));
    for (int d = 0; d < 4; ++d) EXPECT_NEAR(r1[d], r2[d], 1e-9);
  }
}

namespace {

DemoSegment segment_through(const std::vector<Pose2>& ee_poses, std::vector<double> gripper = {}) {
  auto layout = layout_of({"cup"});
  DemoSegment s;
  s.reference_object = "cup";
  for (std::size_t i = 0; i < ee_poses.size(); ++i)
    s.keyframes.push_back(make_kf(layout, {{0, 0, 0}}, ee_poses[i], gripper.empty() ? 0.0 : gripper[i], "cup"));
  s.start_state = s.keyframes.front().world;
  return s;
}

}  // namespace

TEST(Interpolation, SingleKeyframe) {
  EXPECT_EQ(interpolate_segment(segment_through({{0.3, 0.1, 0.0}}), 0.1).size(), 1u);
}

TEST(Interpolation, UniformSubdivisionWithExactEndpoints) {
  const auto traj = interpolate_segment(segment_through({{0, 0, 0}, {1, 0, 0}}, {0.0, 1.0}), 0.25);
  ASSERT_EQ(traj.size(), 5u);
  EXPECT_EQ(traj.front()[0], 0.0);
  EXPECT_EQ(traj.back()[0], 1.0);
  EXPECT_EQ(traj.back()[3], 1.0);
  for (std::size_t i = 0; i < traj.size(); ++i) EXPECT_NEAR(traj[i][0], 0.25 * double(i), 1e-12);
}

TEST(Interpolation, SpacingBoundAndKeyframesVisited) {
  const std::vector<Pose2> poses{{0, 0, 0}, {0.33, 0.2, 0.5}, {0.33, 0.2, -0.5}, {-0.4, 0.9, 0.0}};
  const auto seg = segment_through(poses);
  const auto traj = interpolate_segment(seg, 0.07);
  for (std::size_t i = 0; i + 1 < traj.size(); ++i)
    EXPECT_LE(std::hypot(traj[i + 1][0] - traj[i][0], traj[i + 1][1] - traj[i][1]), 0.07 + 1e-12);
  for (const auto& kf : seg.keyframes) {
    const auto r = relative_keyframe(kf);
    bool hit = false;
    for (const auto& p : traj) hit |= (p == r);
    EXPECT_TRUE(hit);
  }
}

TEST(Interpolation, AngleTakesShortestArcAcrossPi) {
  // Same position, so interpolate in angle alone: force subdivision by
  // moving a little in x as well.
  const auto traj = interpolate_segment(segment_through({{0, 0, 3.0}, {0.1, 0, -3.0}}), 0.01);
  // ee theta relative to an unrotated object is the ee theta itself.
  const double delta = std::atan2(std::sin(-3.0 - 3.0), std::cos(-3.0 - 3.0));
  EXPECT_GT(delta, 0.0);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    EXPECT_GT(std::abs(traj[i][2]), 2.9) << "passed near zero at " << i;
    const double t = double(i) / double(traj.size() - 1);
    EXPECT_NEAR(std::cos(traj[i][2]), std::cos(3.0 + t * delta), 1e-9);
  }
}

TEST(Interpolation, NonPositiveStepRejected) {
  EXPECT_THROW(interpolate_segment(segment_through({{0, 0, 0}}), 0.0), InvalidInput);
}
