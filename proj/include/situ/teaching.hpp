#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "situ/simulator.hpp"
#include "situ/task_model.hpp"
#include "situ/update.hpp"

namespace situ {

/// Scripted teaching: demonstration noise and the seed stream for demos.
struct TeachOptions {
  double sigma = 0.003;
  std::uint64_t seed = 7;
  std::size_t rounds = 1;  // passes over the teach list
};

/// Full demonstrations of the teach list, interleaved round by round.
inline std::vector<Demonstration> teach_demos(const Scenario& sc, const TeachOptions& opt,
                                              const std::vector<std::string>& variants) {
  std::vector<Demonstration> out;
  std::uint64_t k = 0;
  for (std::size_t r = 0; r < opt.rounds; ++r)
    for (const auto& v : variants) {
      const std::string id = sc.name + "/" + v + "/" + std::to_string(r);
      out.push_back(generate_demo(sc, v, id, {opt.sigma, mix_seed(opt.seed, k++)}));
    }
  return out;
}

struct TeachResult {
  TaskModel model;
  std::vector<EditRecord> edits;
  RefitCounters counters;
};

/// Builds a model by running SITU from the start node over each demo.
inline TeachResult teach_incremental(const Scenario& sc, const std::vector<Demonstration>& demos, const Settings& cfg) {
  TeachResult r{make_task_model(sc.layout()), {}, {}};
  for (const auto& d : demos) {
    auto u = situ_demo(r.model, r.model.start_id, d, cfg);
    r.edits.insert(r.edits.end(), u.edits.begin(), u.edits.end());
    r.counters += u.counters;
  }
  return r;
}

inline TeachResult teach(const Scenario& sc, const Settings& cfg, const TeachOptions& opt = {}) {
  return teach_incremental(sc, teach_demos(sc, opt, sc.teach), cfg);
}

inline ExecutionTrace run_with_model(const TaskModel& t, const Scenario& sc, const std::string& variant, double theta,
                                     std::uint64_t seed) {
  ExecOptions opt;
  opt.theta = theta;
  opt.seed = seed;
  return execute(t, make_world(sc, &sc.variant(variant)), sc, opt);
}

inline double success_rate(const TaskModel& t, const Scenario& sc, const std::string& variant, double theta,
                           const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) return 0.0;
  std::size_t ok = 0;
  for (auto s : seeds) ok += run_with_model(t, sc, variant, theta, s).success();
  return double(ok) / double(seeds.size());
}

/// Variant that exercises an edit kind.
inline std::string modification(const Scenario& sc, EditKind kind) {
  auto it = sc.modifications.find(to_string(kind));
  if (it == sc.modifications.end())
    throw InvalidInput("scenario " + sc.name + " has no " + std::string(to_string(kind)) + " modification");
  return it->second;
}

struct CorrectionOutcome {
  ExecutionTrace trace;
  bool corrected = false;
  Demonstration demo;
  SituResult update;
};

/// Executes once; on failure, demonstrates the remaining units from the
/// resume point and folds the correction in with SITU.
inline CorrectionOutcome correct_once(TaskModel& t, const Scenario& sc, const std::string& variant,
                                      const Settings& cfg, std::uint64_t exec_seed, const DemoOptions& demo_opt,
                                      const std::string& demo_id) {
  CorrectionOutcome out;
  out.trace = run_with_model(t, sc, variant, cfg.theta, exec_seed);
  if (out.trace.success()) return out;
  World w = out.trace.resume_world;
  out.demo = demonstrate(sc, w, sc.variant(variant), DemoKind::corrective, demo_id, demo_opt);
  out.update = situ_demo(t, out.trace.resume_node, out.demo, cfg);
  out.corrected = true;
  return out;
}

}  // namespace situ
