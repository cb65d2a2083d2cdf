// situ: build, correct, execute, export and serve task models.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "situ/bench.hpp"
#include "situ/io.hpp"
#include "situ/service.hpp"
#include "situ/teaching.hpp"

using namespace situ;

namespace {

constexpr int kInputError = 2;
constexpr int kConsistencyError = 3;

struct Common {
  std::string scenario;
  double theta = Settings{}.theta;
  double tau = Settings{}.tau;
  double sigma = 0.003;
  std::uint64_t seed = Settings{}.seed;
  std::string model;
  std::string out;

  Settings settings() const {
    Settings s;
    s.theta = theta;
    s.tau = tau;
    s.seed = seed;
    return s;
  }
};

void add_tuning(CLI::App* cmd, Common& c) {
  cmd->add_option("--theta", c.theta, "Classifier activation threshold")->capture_default_str();
  cmd->add_option("--tau", c.tau, "Clustering cut height")->capture_default_str();
  cmd->add_option("--sigma", c.sigma, "Scripted demonstration noise")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Base seed")->capture_default_str();
}

/// Writes to --out, or stdout when no path was given.
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text << std::flush;
  else
    io::write_file(path, text);
}

void log_config(const std::string& cmd, const io::RunConfig& rc) {
  std::cerr << "situ " << cmd << " config=" << io::config_hash(rc) << "\n";
}

std::string edit_summary(const std::vector<EditRecord>& edits, const RefitCounters& c) {
  std::map<std::string, std::size_t> n{{"node_addition", 0}, {"edge_addition", 0}, {"node_modification", 0}};
  for (const auto& e : edits) ++n[to_string(e.kind)];
  std::ostringstream os;
  for (const auto& [k, v] : n) os << k << "=" << v << " ";
  os << "refits.policy=" << c.policy << " refits.classifier=" << c.classifier << " query_fits=" << c.query_fits
     << " distances=" << c.distances;
  return os.str();
}

/// Demonstrations from files must share the scenario's layout.
Demonstration checked_demo(const std::string& path, const Scenario* sc) {
  auto f = io::load_demo(path);
  if (sc && *f.layout != *sc->layout()) throw InvalidInput(path + ": layout does not match scenario " + sc->name);
  return std::move(f.demo);
}

int run(int argc, char** argv) {
  CLI::App app{"State-indexed task updates: build, correct, execute and serve task models"};
  app.require_subcommand(1);
  Common c;

  // build
  auto* build = app.add_subcommand("build", "Build a model by SITU over each demonstration");
  std::vector<std::string> demo_files;
  bool scripted = false;
  std::size_t rounds = 1;
  std::string edits_path;
  build->add_option("--scenario", c.scenario, "Scenario name or file")->required();
  build->add_option("--demo", demo_files, "Demonstration file (repeatable)");
  build->add_flag("--teach", scripted, "Add the scenario's scripted teaching demonstrations");
  build->add_option("--rounds", rounds, "Passes over the teach list")->capture_default_str();
  build->add_option("--out", c.out, "Model file (stdout when absent)");
  build->add_option("--edits", edits_path, "Edit log file");
  add_tuning(build, c);

  // correct
  auto* correct = app.add_subcommand("correct", "Fold a corrective demonstration into a model");
  std::string demo_file, variant;
  std::optional<NodeId> node;
  std::uint64_t exec_seed = 0;
  correct->add_option("--model", c.model, "Model file")->required();
  correct->add_option("--demo", demo_file, "Corrective demonstration file");
  correct->add_option("--node", node, "Node the correction starts from");
  correct->add_option("--scenario", c.scenario, "Scenario for a scripted correction");
  correct->add_option("--variant", variant, "Run this variant and correct its failure with a scripted demo");
  correct->add_option("--exec-seed", exec_seed, "Execution seed for a scripted correction")->capture_default_str();
  correct->add_option("--out", c.out, "Model file (stdout when absent)");
  correct->add_option("--edits", edits_path, "Edit log file");
  add_tuning(correct, c);

  // demo
  auto* demo = app.add_subcommand("demo", "Write a scripted full demonstration");
  std::string demo_id;
  demo->add_option("--scenario", c.scenario, "Scenario name or file")->required();
  demo->add_option("--variant", variant, "Variant")->required();
  demo->add_option("--id", demo_id, "Demonstration id (default scenario/variant)");
  demo->add_option("--out", c.out, "Demonstration file (stdout when absent)");
  add_tuning(demo, c);

  // exec
  auto* exec = app.add_subcommand("exec", "Execute a model over seeded rollouts");
  std::size_t rollouts = 20;
  std::string trace_path;
  exec->add_option("--model", c.model, "Model file")->required();
  exec->add_option("--scenario", c.scenario, "Scenario name or file")->required();
  exec->add_option("--variant", variant, "Variant")->required();
  exec->add_option("--seeds", rollouts, "Number of rollouts (seeds seed..seed+n-1)")->capture_default_str();
  exec->add_option("--trace", trace_path, "Write the first rollout's trace");
  exec->add_option("--out", c.out, "Report file (stdout when absent)");
  add_tuning(exec, c);

  // export-dot
  auto* dot = app.add_subcommand("export-dot", "Write a model as a DOT graph");
  dot->add_option("--model", c.model, "Model file")->required();
  dot->add_option("--out", c.out, "DOT file (stdout when absent)");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Time one corrective update against a full rebuild");
  std::vector<std::size_t> sizes{10, 20, 30, 40, 50};
  std::size_t repeats = 3;
  bench_cmd->add_option("--sizes", sizes, "Model sizes")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--repeats", repeats, "Timing repeats (best is kept)")->capture_default_str();
  bench_cmd->add_option("--out", c.out, "Report file (stdout when absent)");
  add_tuning(bench_cmd, c);

  // serve
  auto* serve = app.add_subcommand("serve", "Host the teaching session protocol over HTTP");
  int port = 8080;
  std::string host = "127.0.0.1";
  serve->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--model", c.model, "Initial model for new sessions");
  add_tuning(serve, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  const Settings cfg = c.settings();
  io::RunConfig rc{c.scenario, cfg, c.sigma, {c.seed}};

  if (*build) {
    const Scenario sc = io::find_scenario(c.scenario);
    log_config("build", rc);
    std::vector<Demonstration> demos;
    for (const auto& f : demo_files) demos.push_back(checked_demo(f, &sc));
    if (scripted) {
      auto more = teach_demos(sc, {c.sigma, c.seed, rounds}, sc.teach);
      demos.insert(demos.end(), more.begin(), more.end());
    }
    const auto r = teach_incremental(sc, demos, cfg);
    check_consistency(r.model);
    emit(c.out, io::model_text(r.model));
    if (!edits_path.empty()) io::write_file(edits_path, io::dump(io::edits_json(r.edits, r.counters)));
    std::cerr << "demos=" << demos.size() << " nodes=" << r.model.nodes.size() - 1 << " edges=" << r.model.edges.size()
              << " " << edit_summary(r.edits, r.counters) << "\n";
    return 0;
  }

  if (*correct) {
    TaskModel t = io::load_model(c.model);
    log_config("correct", rc);
    SituResult update;
    if (!variant.empty()) {
      if (c.scenario.empty()) throw InvalidInput("--variant needs --scenario");
      const Scenario sc = io::find_scenario(c.scenario);
      if (*t.layout != *sc.layout()) throw InvalidInput("model layout does not match scenario " + sc.name);
      const auto out = correct_once(t, sc, variant, cfg, exec_seed, {c.sigma, c.seed}, sc.name + "/" + variant + "/fix");
      if (!out.corrected) std::cerr << "execution succeeded; nothing to correct\n";
      else
        std::cerr << "failure at node " << out.trace.failure_node << " (" << out.trace.reason << "); resumed from node "
                  << out.trace.resume_node << "\n";
      update = out.update;
    } else {
      if (demo_file.empty() || !node) throw InvalidInput("correct needs --demo and --node, or --scenario and --variant");
      const auto d = checked_demo(demo_file, nullptr);
      if (!d.keyframes.empty() && *d.keyframes.front().world.layout != *t.layout)
        throw InvalidInput(demo_file + ": layout does not match model");
      update = situ_demo(t, *node, d, cfg);
    }
    check_consistency(t);
    emit(c.out, io::model_text(t));
    if (!edits_path.empty()) io::write_file(edits_path, io::dump(io::edits_json(update.edits, update.counters)));
    for (const auto& e : update.edits) std::cerr << io::to_json(e).dump() << "\n";
    std::cerr << edit_summary(update.edits, update.counters) << "\n";
    return 0;
  }

  if (*demo) {
    const Scenario sc = io::find_scenario(c.scenario);
    log_config("demo", rc);
    const auto d = generate_demo(sc, variant, demo_id.empty() ? sc.name + "/" + variant : demo_id, {c.sigma, c.seed});
    emit(c.out, io::dump(io::demo_json(d, *sc.layout(), sc.name)));
    return 0;
  }

  if (*exec) {
    const TaskModel t = io::load_model(c.model);
    const Scenario sc = io::find_scenario(c.scenario);
    if (*t.layout != *sc.layout()) throw InvalidInput("model layout does not match scenario " + sc.name);
    sc.variant(variant);
    rc.seeds.clear();
    for (std::size_t i = 0; i < rollouts; ++i) rc.seeds.push_back(c.seed + i);
    log_config("exec", rc);
    io::json report;
    report["schema_version"] = io::kSchemaVersion;
    report["config_hash"] = io::config_hash(rc);
    report["scenario"] = sc.name;
    report["variant"] = variant;
    report["rollouts"] = io::json::array();
    std::size_t ok = 0;
    for (auto s : rc.seeds) {
      const auto tr = run_with_model(t, sc, variant, cfg.theta, s);
      ok += tr.success();
      if (!trace_path.empty() && s == rc.seeds.front()) io::write_file(trace_path, io::dump(io::trace_json(tr)));
      report["rollouts"].push_back({{"seed", s}, {"outcome", tr.success() ? "success" : "failure"}, {"reason", tr.reason}});
    }
    report["successes"] = ok;
    report["success_rate"] = rc.seeds.empty() ? 0.0 : double(ok) / double(rc.seeds.size());
    emit(c.out, io::dump(report));
    std::cerr << "success " << ok << "/" << rc.seeds.size() << "\n";
    return 0;
  }

  if (*dot) {
    emit(c.out, to_dot(io::load_model(c.model)));
    return 0;
  }

  if (*bench_cmd) {
    rc.scenario = "synthetic";
    log_config("bench", rc);
    io::json report;
    report["schema_version"] = io::kSchemaVersion;
    report["config_hash"] = io::config_hash(rc);
    report["rows"] = io::json::array();
    std::fprintf(stderr, "%6s %4s %8s %8s %12s %10s %10s\n", "kappa", "|Z|", "refit.l", "refit.r", "local_ms",
                 "rebuild_ms", "ratio");
    for (auto k : sizes) {
      const auto row = bench::measure(k, cfg, c.seed, repeats);
      std::fprintf(stderr, "%6zu %4zu %8zu %8zu %12.3f %10.3f %10.4f\n", row.kappa, row.applicable, row.local.policy,
                   row.rebuild.policy, row.local_ms, row.rebuild_ms, row.ratio());
      report["rows"].push_back({{"kappa", row.kappa},
                                {"applicable", row.applicable},
                                {"local_refits", io::to_json(row.local)},
                                {"rebuild_refits", io::to_json(row.rebuild)},
                                {"local_ms", row.local_ms},
                                {"rebuild_ms", row.rebuild_ms},
                                {"ratio", row.ratio()}});
    }
    emit(c.out, io::dump(report));
    return 0;
  }

  if (*serve) {
    std::optional<TaskModel> initial;
    if (!c.model.empty()) initial = io::load_model(c.model);
    rc.scenario = "";
    log_config("serve", rc);
    static session::Service* running = nullptr;
    session::Service svc(cfg, std::move(initial));
    const int bound = svc.bind(host, port);
    if (bound <= 0) throw InvalidInput("cannot bind " + host + ":" + std::to_string(port));
    running = &svc;
    std::signal(SIGINT, [](int) { if (running) running->stop(); });
    std::signal(SIGTERM, [](int) { if (running) running->stop(); });
    std::cout << "listening on " << host << ":" << bound << std::endl;
    svc.run();
    running = nullptr;
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const LoadError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const ConsistencyError& e) {
    std::cerr << "consistency error: " << e.what() << "\n";
    return kConsistencyError;
  }
}
