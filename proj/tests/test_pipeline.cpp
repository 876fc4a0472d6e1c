#include <gtest/gtest.h>

#include <map>

#include "generators.hpp"
#include "songpipe/pipeline.hpp"
#include "tempdir.hpp"

using namespace songpipe;
namespace fs = std::filesystem;

namespace {

std::map<std::string, Bytes> snapshot(const fs::path& dir) {
  std::map<std::string, Bytes> files;
  for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = read_file_bytes(e.path());
  return files;
}

PipelineConfig small_config(const testutil::TempDir& dir, std::uint64_t seed = 3) {
  gen::Rng rng(seed);
  const auto score = gen::random_score(rng, {.min_bars = 8, .max_bars = 10, .min_bpm = 100, .max_bpm = 120});
  write_file(dir / "score.json", write_score_text(score));
  PipelineConfig c;
  c.score_path = (dir / "score.json").string();
  c.output_dir = (dir / "out").string();
  c.sample_rate = 16000;
  c.seed = seed;
  return c;
}

Stage failing_stage(const PipelineConfig& c, Stage from = Stage::kLoad) {
  try {
    run_pipeline(c, from);
  } catch (const StageError& e) {
    return e.stage();
  }
  ADD_FAILURE() << "pipeline did not fail";
  return Stage::kEval;
}

}  // namespace

TEST(Pipeline, WritesEveryArtifact) {
  testutil::TempDir dir("sp-pipeline");
  const auto c = small_config(dir);
  const auto r = run_pipeline(c);
  for (const auto& name : r.manifest["artifacts"]) {
    EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / name.get<std::string>())) << name;
  }
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / artifact::kManifest));
  EXPECT_EQ(r.report.rhythm.f1, 1.0);
  EXPECT_EQ(r.report.key_accuracy, 1.0);
  const auto score = read_score_text(read_text_file(fs::path(c.output_dir) / artifact::kScore));
  EXPECT_EQ(score.sections.front().label, SectionLabel::kIntro);
}

TEST(Pipeline, MissingScoreFailsInLoad) {
  testutil::TempDir dir("sp-missing");
  PipelineConfig c;
  c.score_path = (dir / "nope.json").string();
  c.output_dir = (dir / "out").string();
  EXPECT_EQ(failing_stage(c), Stage::kLoad);
  try {
    run_pipeline(c);
  } catch (const StageError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
    EXPECT_NE(std::string(e.what()).find("stage 'load'"), std::string::npos);
  }
}

TEST(Pipeline, InvalidScoreFailsInValidate) {
  testutil::TempDir dir("sp-invalid");
  VocalScore s;
  s.notes = {{0, 960, 60, std::nullopt}, {480, 480, 62, std::nullopt}};
  s.sections = {{SectionLabel::kVerse, 0, 1920, std::nullopt}};
  write_file(dir / "score.json", score_to_json(s).dump());
  PipelineConfig c;
  c.score_path = (dir / "score.json").string();
  c.output_dir = (dir / "out").string();
  EXPECT_EQ(failing_stage(c), Stage::kValidate);
  try {
    run_pipeline(c);
  } catch (const StageError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidScore);
  }
}

TEST(Pipeline, NoVerseFailsInPlan) {
  testutil::TempDir dir("sp-noverse");
  VocalScore s;
  s.notes = {{0, 960, 60, std::nullopt}};
  s.sections = {{SectionLabel::kChorus, 0, 1920, std::nullopt}};
  write_file(dir / "score.json", write_score_text(s));
  PipelineConfig c;
  c.score_path = (dir / "score.json").string();
  c.output_dir = (dir / "out").string();
  EXPECT_EQ(failing_stage(c), Stage::kPlan);
}

TEST(Pipeline, SameSeedIsByteIdentical) {
  testutil::TempDir dir("sp-determinism");
  const auto c = small_config(dir);
  run_pipeline(c);
  const auto first = snapshot(c.output_dir);
  run_pipeline(c);
  EXPECT_EQ(snapshot(c.output_dir), first);
}

TEST(Pipeline, ResumeFromConditionPicksUpEditedChords) {
  testutil::TempDir dir("sp-resume");
  const auto c = small_config(dir);
  run_pipeline(c);
  const auto before = snapshot(c.output_dir);
  const auto chords_path = fs::path(c.output_dir) / artifact::kChords;
  auto chords = read_chords(read_text_file(chords_path));
  for (auto& e : chords.entries) e.chord = Chord{(e.chord.root + 2) % 12, e.chord.quality};
  write_file(chords_path, write_chords(chords));
  run_pipeline(c, Stage::kCondition);
  const auto after = snapshot(c.output_dir);
  for (const char* same : {artifact::kScore, artifact::kRegister}) EXPECT_EQ(after.at(same), before.at(same)) << same;
  for (const char* changed : {artifact::kKeys, artifact::kBundle, artifact::kAccompaniment, artifact::kMix}) {
    EXPECT_NE(after.at(changed), before.at(changed)) << changed;
  }
  EXPECT_EQ(read_chords(read_text_file(chords_path)), chords);
}

TEST(Pipeline, ResumeFromEvalReusesRender) {
  testutil::TempDir dir("sp-eval");
  const auto c = small_config(dir);
  const auto full = run_pipeline(c);
  const auto again = run_pipeline(c, Stage::kEval);
  EXPECT_EQ(again.report.rhythm.f1, full.report.rhythm.f1);
  EXPECT_EQ(again.report.chord.f1, full.report.chord.f1);
}

TEST(Pipeline, ConfigJsonRoundTripAndRelativePaths) {
  PipelineConfig c;
  c.score_path = "/abs/score.mid";
  c.prompt = "warm";
  c.section_prompts = {{"chorus", "big"}};
  c.seed = 99;
  const auto back = config_from_json(config_to_json(c).dump());
  EXPECT_EQ(back.score_path, c.score_path);
  EXPECT_EQ(back.prompt, c.prompt);
  EXPECT_EQ(back.section_prompts, c.section_prompts);
  EXPECT_EQ(back.seed, 99u);
  const auto rel = config_from_json(R"({"score": "s.json", "output_dir": "o"})", "/base");
  EXPECT_EQ(rel.score_path, "/base/s.json");
  EXPECT_EQ(rel.output_dir, "/base/o");
  EXPECT_THROW(config_from_json("[1]"), Error);
  c.section_prompts = {{"hook", "x"}};
  EXPECT_THROW(require_valid(c), Error);
  EXPECT_EQ(parse_stage("condition"), Stage::kCondition);
  EXPECT_FALSE(parse_stage("bogus").has_value());
}
