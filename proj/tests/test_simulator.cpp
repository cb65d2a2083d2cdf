#include <gtest/gtest.h>

#include <random>

#include "situ/io.hpp"
#include "situ/teaching.hpp"

using namespace situ;

namespace {

const Scenario& pour() {
  static const Scenario s = io::find_scenario("pour");
  return s;
}
const Scenario& scoop() {
  static const Scenario s = io::find_scenario("scoop");
  return s;
}

std::vector<std::uint64_t> seeds(std::size_t n, std::uint64_t from = 0) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(from + i);
  return out;
}

bool same_flags(const World& a, const World& b) {
  return a.filled == b.filled && a.spilled == b.spilled && a.loaded == b.loaded && a.held == b.held;
}

}  // namespace

TEST(Rules, MoveWithoutTriggersOnlyMovesEndEffector) {
  World w = make_world(pour(), &pour().variant("base"));
  const World before = w;
  step_to(w, {0.2, -0.2, 0.3}, 0.0);
  EXPECT_FALSE(w.fault);
  EXPECT_EQ(w.poses, before.poses);
  EXPECT_TRUE(same_flags(w, before));
  EXPECT_EQ(w.ee, (Pose2{0.2, -0.2, 0.3}));
}

TEST(Rules, GraspSequenceAttachesAndCarries) {
  World w = make_world(pour(), &pour().variant("base"));
  const Pose2 p = w.pose("pitcher");
  step_to(w, {p.x, p.y - 0.15, 0}, 0);
  step_to(w, p, 0);
  EXPECT_FALSE(w.held);
  step_to(w, p, 1);
  ASSERT_TRUE(w.held);
  EXPECT_EQ(w.id(*w.held), "pitcher");
  step_to(w, {p.x + 0.3, p.y, 0}, 1);
  EXPECT_NEAR(w.pose("pitcher").x, p.x + 0.3, 1e-12);
  step_to(w, {p.x + 0.3, p.y, 0}, 0);
  EXPECT_FALSE(w.held);
  step_to(w, {0, -0.6, 0}, 0);
  EXPECT_NEAR(w.pose("pitcher").x, p.x + 0.3, 1e-12);
}

TEST(Rules, ClosingAwayFromObjectsGraspsNothing) {
  World w = make_world(pour());
  step_to(w, {0.0, -0.9, 0}, 1);
  EXPECT_FALSE(w.held);
  EXPECT_FALSE(w.fault);
}

TEST(Rules, PourFillsUncoveredBowl) {
  World w = make_world(pour(), &pour().variant("base"));
  const Pose2 p = w.pose("pitcher"), b = w.pose("bowl");
  step_to(w, p, 0), step_to(w, p, 1);
  step_to(w, {b.x - 0.15, b.y, 0}, 1);
  step_to(w, {b.x - 0.15, b.y, 1.3}, 1);
  EXPECT_FALSE(w.fault);
  EXPECT_TRUE(w.filled.count("bowl"));
}

TEST(Rules, PourOntoLidLeavesContentsUnchangedAndFaults) {
  World w = make_world(pour(), &pour().variant("covered"));
  const Pose2 p = w.pose("pitcher"), b = w.pose("bowl");
  step_to(w, p, 0), step_to(w, p, 1);
  step_to(w, {b.x - 0.15, b.y, 0}, 1);
  step_to(w, {b.x - 0.15, b.y, 1.3}, 1);
  ASSERT_TRUE(w.fault);
  EXPECT_FALSE(w.filled.count("bowl"));
  EXPECT_FALSE(w.spilled);
  // A faulted world no longer moves.
  const Pose2 ee = w.ee;
  step_to(w, {0, 0, 0}, 0);
  EXPECT_EQ(w.ee, ee);
}

TEST(Rules, PourIntoNothingSpills) {
  World w = make_world(pour(), &pour().variant("base"));
  const Pose2 p = w.pose("pitcher");
  step_to(w, p, 0), step_to(w, p, 1);
  step_to(w, {p.x, p.y - 0.3, 1.3}, 1);
  EXPECT_TRUE(w.spilled);
  EXPECT_TRUE(w.fault);
}

TEST(Rules, CoveredObjectCannotBeGrasped) {
  World w = make_world(pour(), &pour().variant("toweled"));
  const Pose2 p = w.pose("pitcher");
  step_to(w, p, 0), step_to(w, p, 1);
  ASSERT_TRUE(w.fault);
  EXPECT_NE(w.fault->find("towel"), std::string::npos);
}

TEST(Rules, ReleasingOntoAnotherObjectCollides) {
  World w = make_world(pour(), &pour().variant("weighted"));
  const Pose2 p = w.pose("pitcher"), pad = w.pose("pad");
  step_to(w, p, 0), step_to(w, p, 1);
  step_to(w, pad, 1), step_to(w, pad, 0);
  ASSERT_TRUE(w.fault);
  EXPECT_NE(w.fault->find("weight"), std::string::npos);
}

TEST(Rules, LeavingWorkspaceIsUnreachable) {
  World w = make_world(pour());
  step_to(w, {3.0, 0.0, 0.0}, 0);
  ASSERT_TRUE(w.fault);
  EXPECT_NE(w.fault->find("unreachable"), std::string::npos);
}

TEST(Rules, ScoopLoadsAtSourceAndFillsTarget) {
  World w = make_world(scoop(), &scoop().variant("base"));
  const Pose2 s = w.pose("spoon"), pot = w.pose("pot"), bowl = w.pose("bowl");
  step_to(w, s, 0), step_to(w, s, 1);
  step_to(w, {pot.x - 0.15, pot.y, 0}, 1);
  step_to(w, {pot.x - 0.15, pot.y, -1.2}, 1);
  EXPECT_TRUE(w.loaded);
  step_to(w, {pot.x - 0.15, pot.y, 0}, 1);
  step_to(w, {bowl.x, bowl.y - 0.15, 0}, 1);
  step_to(w, {bowl.x, bowl.y - 0.15, 1.3}, 1);
  EXPECT_FALSE(w.loaded);
  EXPECT_TRUE(w.filled.count("bowl"));
  EXPECT_FALSE(w.fault);
}

TEST(RuleProperties, FlagsOnlyChangeInsideTriggerRegions) {
  // Fuzz random tick sequences; every flag transition must happen with the
  // end effector inside the matching trigger region.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u01(0, 1);
  std::size_t grasps = 0, tilts = 0;
  for (int run = 0; run < 200; ++run) {
    const Scenario& sc = run % 2 ? pour() : scoop();
    World w = make_world(sc, &sc.variants[rng() % sc.variants.size()]);
    Pose2 ee = w.ee;
    double g = 0.0;
    for (int t = 0; t < 400 && !w.fault; ++t) {
      const Pose2 o = w.poses[rng() % w.poses.size()];
      const bool jump = u01(rng) < 0.05;
      if (jump) ee = {o.x + 0.2 * (u01(rng) - 0.5), o.y + 0.2 * (u01(rng) - 0.5), ee.theta};
      ee.theta = u01(rng) < 0.1 ? (u01(rng) < 0.5 ? 0.0 : 1.2) : ee.theta;
      g = u01(rng) < 0.1 ? 1.0 - g : g;
      const World before = w;
      detail::tick(w, ee, g);
      if (w.held != before.held && w.held) {
        ++grasps;
        const Pose2 op = before.poses[*w.held];
        EXPECT_LE(std::hypot(ee.x - op.x, ee.y - op.y), w.rules.grasp_radius + 1e-12);
        EXPECT_LT(before.gripper, w.rules.gripper_threshold);
        EXPECT_GE(g, w.rules.gripper_threshold);
      }
      for (const auto& c : w.filled)
        if (!before.filled.count(c)) {
          const Pose2 cp = w.pose(c);
          EXPECT_LE(std::hypot(ee.x - cp.x, ee.y - cp.y), w.rules.container_radius + 1e-12);
          EXPECT_LT(std::abs(before.ee.theta), w.rules.tilt_threshold);
          EXPECT_GE(std::abs(ee.theta), w.rules.tilt_threshold);
        }
      if (w.loaded && !before.loaded) {
        EXPECT_GE(std::abs(ee.theta), w.rules.tilt_threshold);
        ASSERT_TRUE(w.held);
        EXPECT_TRUE(w.has(*w.held, "scoop"));
      }
      if (w.spilled && !before.spilled) EXPECT_TRUE(w.fault);
      tilts += w.filled != before.filled || w.loaded != before.loaded || w.spilled != before.spilled;
    }
  }
  EXPECT_GT(grasps, 20u);
  EXPECT_GT(tilts, 5u);
}

TEST(Demonstrator, NoiselessDemoReproducesTemplateAndMeetsGoal) {
  for (const Scenario* sc : {&pour(), &scoop()}) {
    for (const auto& v : sc->variants) {
      World w = make_world(*sc, &v);
      const auto d = demonstrate(*sc, w, v, DemoKind::full, v.id, {0.0, 1});
      EXPECT_TRUE(goal_met(*sc, w)) << sc->name << "/" << v.id;
      // Every keyframe sits exactly on its template pose relative to the
      // reference object as it was when the skill began.
      std::size_t k = 0;
      World replay = make_world(*sc, &v);
      for (const auto& uname : v.units) {
        const Unit& u = sc->units.at(uname);
        if (holds(u.done, replay)) continue;
        for (const auto& sname : u.skills) {
          const Skill& sk = sc->skills.at(sname);
          const Pose2 frame = replay.pose(sk.reference);
          for (const auto& t : sk.keyframes) {
            ASSERT_LT(k, d.keyframes.size());
            const Pose2 rel = relative_to(frame, d.keyframes[k].ee_pose);
            EXPECT_NEAR(rel.x, t[0], 1e-12);
            EXPECT_NEAR(rel.y, t[1], 1e-12);
            EXPECT_NEAR(rel.theta, t[2], 1e-12);
            EXPECT_EQ(d.keyframes[k].gripper, t[3]);
            EXPECT_EQ(d.keyframes[k].reference_object, sk.reference);
            step_to(replay, compose(frame, {t[0], t[1], t[2]}), t[3]);
            ++k;
          }
        }
      }
      EXPECT_EQ(k, d.keyframes.size());
    }
  }
}

TEST(Demonstrator, SeedsDifferAndRepeat) {
  const auto a = generate_demo(pour(), "base", "a", {0.003, 1});
  const auto b = generate_demo(pour(), "base", "a", {0.003, 2});
  const auto c = generate_demo(pour(), "base", "a", {0.003, 1});
  EXPECT_NE(a, b);
  EXPECT_EQ(a, c);
  ASSERT_TRUE(a.initial_world);
  EXPECT_EQ(*a.initial_world, make_world(pour(), &pour().variant("base")).state());
}

TEST(Execution, EmptyModelFailsImmediately) {
  const auto t = make_task_model(pour().layout());
  const auto tr = run_with_model(t, pour(), "base", 0.5, 1);
  EXPECT_FALSE(tr.success());
  EXPECT_EQ(tr.visited, (std::vector<NodeId>{0}));
  EXPECT_EQ(tr.failure_state, make_world(pour(), &pour().variant("base")).state());
}

TEST(Execution, DeterministicUnderSeed) {
  const auto r = teach(pour(), Settings{});
  const auto a = run_with_model(r.model, pour(), "covered", 0.5, 3);
  const auto b = run_with_model(r.model, pour(), "covered", 0.5, 3);
  EXPECT_EQ(a.visited, b.visited);
  EXPECT_EQ(a.plans, b.plans);
  EXPECT_EQ(a.final_world.poses, b.final_world.poses);
  EXPECT_EQ(io::trace_json(a).dump(), io::trace_json(b).dump());
}

TEST(Execution, ObserverSeesEveryNodeAndKeyframe) {
  const auto r = teach(pour(), Settings{});
  std::vector<ExecutionEvent> events;
  ExecOptions opt;
  opt.seed = 4;
  opt.observer = [&](const ExecutionEvent& e) { events.push_back(e); };
  const auto tr = execute(r.model, make_world(pour(), &pour().variant("base")), pour(), opt);
  ASSERT_TRUE(tr.success());
  std::size_t entered = 0, kfs = 0, planned = 0;
  for (const auto& e : events) {
    entered += e.kind == ExecutionEvent::Kind::node_entered;
    kfs += e.kind == ExecutionEvent::Kind::keyframe;
  }
  for (const auto& p : tr.plans) planned += p.size();
  EXPECT_EQ(entered, tr.visited.size() - 1);
  EXPECT_EQ(kfs, planned);
  EXPECT_EQ(events.back().kind, ExecutionEvent::Kind::terminal);
}

TEST(Scenarios, TaughtVariantsSucceed) {
  for (const Scenario* sc : {&pour(), &scoop()}) {
    const auto r = teach(*sc, Settings{});
    EXPECT_NO_THROW(check_consistency(r.model));
    for (const auto& v : sc->teach) EXPECT_GE(success_rate(r.model, *sc, v, 0.5, seeds(20)), 0.9) << sc->name << "/" << v;
  }
}

TEST(Scenarios, ModificationsFailBeforeCorrection) {
  for (const Scenario* sc : {&pour(), &scoop()}) {
    const auto r = teach(*sc, Settings{});
    for (auto kind : {EditKind::node_addition, EditKind::edge_addition, EditKind::node_modification}) {
      const auto v = modification(*sc, kind);
      const auto tr = run_with_model(r.model, *sc, v, 0.5, 11);
      EXPECT_FALSE(tr.success()) << sc->name << "/" << v;
      EXPECT_EQ(tr.failure_state.dim(), sc->layout()->dim());
      EXPECT_TRUE(r.model.contains(tr.failure_node));
    }
  }
}

TEST(Scenarios, NodeAdditionCorrectionIntroducesUnseenReference) {
  for (const Scenario* sc : {&pour(), &scoop()}) {
    auto r = teach(*sc, Settings{});
    std::set<std::string> seen;
    for (const auto& [id, z] : r.model.nodes)
      for (const auto& s : z.segments) seen.insert(s.reference_object);
    const auto out = correct_once(r.model, *sc, modification(*sc, EditKind::node_addition), Settings{}, 11,
                                  {0.003, 5}, "fix");
    ASSERT_TRUE(out.corrected);
    bool unseen = false;
    for (const auto& k : out.demo.keyframes) unseen |= !seen.count(k.reference_object);
    EXPECT_TRUE(unseen) << sc->name;
  }
}

TEST(Scenarios, NodeModificationSegmentsMatchExistingClusters) {
  const Settings cfg;
  for (const Scenario* sc : {&pour(), &scoop()}) {
    const auto r = teach(*sc, cfg);
    const auto tr = run_with_model(r.model, *sc, modification(*sc, EditKind::node_modification), 0.5, 11);
    ASSERT_FALSE(tr.success());
    World w = tr.resume_world;
    const auto d = demonstrate(*sc, w, sc->variant(modification(*sc, EditKind::node_modification)),
                               DemoKind::corrective, "fix", {0.003, 5});
    std::vector<PolicyRef> lib;
    for (const auto& [id, z] : r.model.nodes)
      if (z.policy) lib.push_back({id, &*z.policy});
    for (const auto& seg : segment_by_reference(d)) EXPECT_TRUE(find_policy(seg, lib, cfg).has_value());
  }
}

TEST(Scenarios, ValidationRejectsDanglingNames) {
  Scenario sc = pour();
  sc.skills["grasp_pitcher"].reference = "nope";
  EXPECT_THROW(validate(sc), MissingObject);
  sc = pour();
  sc.units["pour"].skills.push_back("fly");
  EXPECT_THROW(validate(sc), InvalidInput);
  sc = pour();
  sc.teach.push_back("ghost");
  EXPECT_THROW(validate(sc), InvalidInput);
  EXPECT_THROW(modification(Scenario{}, EditKind::node_addition), InvalidInput);
}
