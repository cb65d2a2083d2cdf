#include <gtest/gtest.h>

#include <filesystem>

#include "situ/io.hpp"
#include "situ/teaching.hpp"

using namespace situ;
namespace fs = std::filesystem;

namespace {

const Scenario& pour() {
  static const Scenario s = io::find_scenario("pour");
  return s;
}

const TeachResult& taught() {
  static const TeachResult r = teach(pour(), Settings{});
  return r;
}

std::string load_error(const std::string& text, auto reader) {
  try {
    const auto j = io::parse(text);
    reader(io::At(j));
  } catch (const LoadError& e) {
    return e.what();
  }
  return "";
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("situ_io_" + std::to_string(::getpid()))) { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST(DemoFile, RoundTripIsExact) {
  const auto d = generate_demo(pour(), "covered", "pour/covered/0", {0.003, 3});
  const std::string text = io::dump(io::demo_json(d, *pour().layout(), "pour"));
  const auto j = io::parse(text);
  const auto f = io::demo_from(io::At(j));
  EXPECT_EQ(f.scenario, "pour");
  EXPECT_EQ(*f.layout, *pour().layout());
  EXPECT_EQ(f.demo, d);
  EXPECT_EQ(io::dump(io::demo_json(f.demo, *f.layout, f.scenario)), text);
}

TEST(DemoFile, SaveAndLoadThroughDisk) {
  TempDir tmp;
  const auto d = generate_demo(pour(), "base", "x", {0.003, 1});
  const auto path = (tmp.path / "demo.json").string();
  io::save_demo(path, d, *pour().layout(), "pour");
  EXPECT_EQ(io::load_demo(path).demo, d);
}

TEST(DemoFile, MissingInitialWorldIsAccepted) {
  auto d = generate_demo(pour(), "base", "x", {0.003, 1});
  d.initial_world.reset();
  const auto j = io::parse(io::dump(io::demo_json(d, *pour().layout())));
  EXPECT_FALSE(io::demo_from(io::At(j)).demo.initial_world);
}

TEST(ModelFile, SaveLoadSaveIsByteIdentical) {
  const std::string a = io::model_text(taught().model);
  const auto j = io::parse(a);
  const TaskModel loaded = io::model_from(io::At(j));
  EXPECT_EQ(io::model_text(loaded), a);
}

TEST(ModelFile, LoadedModelBehavesIdentically) {
  const auto j = io::parse(io::model_text(taught().model));
  const TaskModel loaded = io::model_from(io::At(j));
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto a = run_with_model(taught().model, pour(), "toweled", 0.5, s);
    const auto b = run_with_model(loaded, pour(), "toweled", 0.5, s);
    EXPECT_EQ(io::trace_json(a).dump(), io::trace_json(b).dump());
  }
}

TEST(ModelFile, DiskRoundTrip) {
  TempDir tmp;
  const auto path = (tmp.path / "model.json").string();
  io::save_model(path, taught().model);
  EXPECT_EQ(io::model_text(io::load_model(path)), io::model_text(taught().model));
}

TEST(ModelFile, InconsistentModelIsRejected) {
  auto j = io::parse(io::model_text(taught().model));
  j["edges"].push_back(io::json::array({0, 999}));
  EXPECT_THROW(io::model_from(io::At(j)), ConsistencyError);
}

TEST(ModelFile, DuplicateNodeIdIsLocated) {
  auto j = io::parse(io::model_text(taught().model));
  j["nodes"].push_back(j["nodes"][1]);
  const std::string last = std::to_string(j["nodes"].size() - 1);
  try {
    io::model_from(io::At(j));
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("/nodes/" + last + "/id"), std::string::npos) << e.what();
  }
}

TEST(EditLog, RoundTrip) {
  const auto& r = taught();
  ASSERT_FALSE(r.edits.empty());
  const auto j = io::parse(io::dump(io::edits_json(r.edits, r.counters)));
  EXPECT_EQ(io::edits_from(io::At(j)), r.edits);
  EXPECT_EQ(j["refit_counts"]["policy"].get<std::size_t>(), r.counters.policy);
}

TEST(ScenarioFile, RoundTripIsExact) {
  for (const char* name : {"pour", "scoop"}) {
    const Scenario sc = io::find_scenario(name);
    const std::string text = io::dump(io::scenario_json(sc));
    const auto j = io::parse(text);
    const Scenario back = io::scenario_from(io::At(j));
    EXPECT_EQ(io::dump(io::scenario_json(back)), text);
    EXPECT_EQ(*back.layout(), *sc.layout());
  }
}

TEST(ScenarioFile, DanglingReferenceIsLoadError) {
  auto j = io::scenario_json(pour());
  j["teach"].push_back("nowhere");
  EXPECT_THROW(io::scenario_from(io::At(j)), LoadError);
}

TEST(ScenarioFile, UnknownScenarioName) { EXPECT_THROW(io::find_scenario("juggle"), InvalidInput); }

TEST(Config, RoundTripAndStableHash) {
  io::RunConfig c{"pour", Settings{}, 0.003, {1, 2, 3}};
  const auto j = io::parse(io::dump(io::config_json(c)));
  const auto back = io::config_from(io::At(j));
  EXPECT_EQ(back, c);
  EXPECT_EQ(io::config_hash(back), io::config_hash(c));
  auto d = c;
  d.settings.theta = 0.6;
  EXPECT_NE(io::config_hash(d), io::config_hash(c));
  d = c;
  d.settings.classifier.min_scale = 0.1;
  EXPECT_NE(io::config_hash(d), io::config_hash(c));
  EXPECT_EQ(io::config_hash(c).size(), 16u);
}

TEST(Config, HashIsFnv1aOfCanonicalText) {
  // Published FNV-1a 64-bit test vectors.
  EXPECT_EQ(io::hex(io::fnv1a("")), "cbf29ce484222325");
  EXPECT_EQ(io::hex(io::fnv1a("a")), "af63dc4c8601ec8c");
  EXPECT_EQ(io::hex(io::fnv1a("foobar")), "85944171f73967e8");
  io::RunConfig c{"pour", Settings{}, 0.003, {}};
  EXPECT_EQ(io::config_hash(c), io::hex(io::fnv1a(io::config_json(c).dump())));
}

TEST(Errors, ParseErrorCarriesByteOffset) {
  const auto msg = load_error("{\"a\": [1, 2,, 3]}", [](const io::At&) {});
  EXPECT_NE(msg.find("byte 13"), std::string::npos) << msg;
}

TEST(Errors, MissingFieldNamesJsonPointer) {
  auto j = io::demo_json(generate_demo(pour(), "base", "x", {0.003, 1}), *pour().layout());
  j["keyframes"][2].erase("gripper");
  const auto msg = load_error(j.dump(), [](const io::At& a) { io::demo_from(a); });
  EXPECT_NE(msg.find("/keyframes/2: missing field 'gripper'"), std::string::npos) << msg;
}

TEST(Errors, WrongTypeNamesJsonPointer) {
  auto j = io::demo_json(generate_demo(pour(), "base", "x", {0.003, 1}), *pour().layout());
  j["keyframes"][1]["ee"][2] = "north";
  const auto msg = load_error(j.dump(), [](const io::At& a) { io::demo_from(a); });
  EXPECT_NE(msg.find("/keyframes/1/ee/2: expected number"), std::string::npos) << msg;
}

TEST(Errors, WorldDimensionMismatchIsLocated) {
  auto j = io::demo_json(generate_demo(pour(), "base", "x", {0.003, 1}), *pour().layout());
  j["keyframes"][0]["world"].erase(0);
  const auto msg = load_error(j.dump(), [](const io::At& a) { io::demo_from(a); });
  EXPECT_NE(msg.find("/keyframes/0/world"), std::string::npos) << msg;
}

TEST(Errors, UnknownReferenceIsLocated) {
  auto j = io::demo_json(generate_demo(pour(), "base", "x", {0.003, 1}), *pour().layout());
  j["keyframes"][0]["reference"] = "ghost";
  const auto msg = load_error(j.dump(), [](const io::At& a) { io::demo_from(a); });
  EXPECT_NE(msg.find("/keyframes/0/reference"), std::string::npos) << msg;
}

TEST(Errors, SchemaVersionChecked) {
  auto j = io::config_json({"pour", Settings{}, 0.003, {}});
  j["schema_version"] = 2;
  const auto msg = load_error(j.dump(), [](const io::At& a) { io::config_from(a); });
  EXPECT_NE(msg.find("/schema_version: unsupported schema version 2"), std::string::npos) << msg;
}

TEST(Errors, MissingFileIsLoadError) { EXPECT_THROW(io::load_model("/nonexistent/model.json"), LoadError); }

TEST(Trace, CarriesFailureAndResumeStates) {
  const auto tr = run_with_model(taught().model, pour(), "weighted", 0.5, 11);
  ASSERT_FALSE(tr.success());
  const auto j = io::trace_json(tr);
  EXPECT_EQ(j["outcome"], "failure");
  EXPECT_EQ(j["failure_state"].size(), pour().layout()->dim());
  EXPECT_EQ(j["resume_state"].size(), pour().layout()->dim());
  EXPECT_EQ(j["visited"].size(), tr.visited.size());
}
