/**
 * @file pipeline.hpp
 * @brief End-to-end orchestration: score in, accompaniment, mix and
 *        self-evaluation report out, with every intermediate artifact
 *        written to the output directory and re-loadable from there.
 */
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "songpipe/audio.hpp"
#include "songpipe/beat_inference.hpp"
#include "songpipe/chords.hpp"
#include "songpipe/conditioning.hpp"
#include "songpipe/error.hpp"
#include "songpipe/harmonizer.hpp"
#include "songpipe/metrics.hpp"
#include "songpipe/render.hpp"
#include "songpipe/score.hpp"
#include "songpipe/score_io.hpp"
#include "songpipe/symbolic_prep.hpp"
#include "songpipe/window_planner.hpp"

namespace songpipe {

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline Bytes read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

inline void write_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline VocalScore load_score_file(const std::filesystem::path& path, bool validate = true) {
  return read_score(read_file_bytes(path), format_for_path(path.string()), validate);
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct PipelineConfig {
  std::string score_path;
  std::optional<std::string> lyrics_path;
  std::optional<std::string> reference_bank_path;
  /// Singing-voice WAV; a guide tone rendered from the score when absent.
  std::optional<std::string> vocal_path;
  /// User progression, honored verbatim instead of harmonizing.
  std::optional<std::string> chords_path;
  /// One key per section of the final score; estimated from the chords when absent.
  std::optional<std::string> keys_path;
  std::string output_dir = "out";
  std::vector<SingerProfile> singers = default_singer_profiles();
  HarmonizerWeights harmonizer;
  double frame_rate = kDefaultFrameRate;
  double sigma = kDefaultSigma;
  double max_window = kMaxWindowSeconds;
  double p_backward = kBackwardSwapProbability;
  std::uint64_t seed = 0;
  int sample_rate = kDefaultSampleRate;
  int intro_bars = kIntroBars;
  bool reject_fewer_lines = false;
  /// Style text for sections without their own prompt.
  std::optional<std::string> prompt;
  std::map<std::string, std::string> section_prompts;
};

inline void require_valid(const PipelineConfig& c) {
  if (c.score_path.empty()) throw Error(ErrorCode::kInvalidArgument, "score path is required");
  if (!(c.frame_rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "frame_rate must be > 0");
  if (!(c.sigma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be > 0");
  if (!(c.max_window > 0.0)) throw Error(ErrorCode::kInvalidArgument, "max_window must be > 0");
  if (!(c.p_backward >= 0.0 && c.p_backward <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "p_backward must lie in [0, 1]");
  }
  if (c.sample_rate <= 0) throw Error(ErrorCode::kInvalidArgument, "sample_rate must be > 0");
  if (c.intro_bars < 0) throw Error(ErrorCode::kInvalidArgument, "intro_bars must be >= 0");
  if (c.singers.empty()) throw Error(ErrorCode::kInvalidArgument, "no singer profiles");
  for (const auto& [label, text] : c.section_prompts) {
    if (!parse_section_label(label)) throw Error(ErrorCode::kUnknownSectionLabel, label);
  }
  require_valid(c.harmonizer);
}

inline nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["score"] = c.score_path;
  auto put_opt = [&](const char* key, const std::optional<std::string>& v) {
    j[key] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  put_opt("lyrics", c.lyrics_path);
  put_opt("reference_bank", c.reference_bank_path);
  put_opt("vocal", c.vocal_path);
  put_opt("chords", c.chords_path);
  put_opt("keys", c.keys_path);
  j["output_dir"] = c.output_dir;
  auto singers = nlohmann::ordered_json::array();
  for (const auto& s : c.singers) singers.push_back({{"name", s.name}, {"low", s.low}, {"high", s.high}});
  j["singers"] = std::move(singers);
  j["harmonizer"] = {{"emission_weight", c.harmonizer.emission_weight},
                     {"transition_weight", c.harmonizer.transition_weight},
                     {"chord_change_penalty", c.harmonizer.chord_change_penalty}};
  j["frame_rate"] = c.frame_rate;
  j["sigma"] = c.sigma;
  j["max_window"] = c.max_window;
  j["p_backward"] = c.p_backward;
  j["seed"] = c.seed;
  j["sample_rate"] = c.sample_rate;
  j["intro_bars"] = c.intro_bars;
  j["reject_fewer_lines"] = c.reject_fewer_lines;
  put_opt("prompt", c.prompt);
  j["section_prompts"] = c.section_prompts;
  return j;
}

/// @brief Reads the JSON configuration. Missing keys keep their defaults;
/// relative paths resolve against `base_dir`.
inline PipelineConfig config_from_json(std::string_view text, const std::filesystem::path& base_dir = {}) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kParse, "config is not a JSON object");
  PipelineConfig c;
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return (path.is_absolute() || base_dir.empty()) ? p : (base_dir / path).lexically_normal().string();
  };
  auto get_path = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return resolve(j[key].get<std::string>());
  };
  try {
    if (auto s = get_path("score")) c.score_path = *s;
    c.lyrics_path = get_path("lyrics");
    c.reference_bank_path = get_path("reference_bank");
    c.vocal_path = get_path("vocal");
    c.chords_path = get_path("chords");
    c.keys_path = get_path("keys");
    if (j.contains("output_dir")) c.output_dir = resolve(j["output_dir"].get<std::string>());
    if (j.contains("singers")) {
      c.singers.clear();
      for (const auto& s : j["singers"]) {
        c.singers.push_back({s.at("name").get<std::string>(), s.at("low").get<int>(), s.at("high").get<int>()});
      }
    }
    if (j.contains("harmonizer")) {
      const auto& h = j["harmonizer"];
      c.harmonizer.emission_weight = h.value("emission_weight", c.harmonizer.emission_weight);
      c.harmonizer.transition_weight = h.value("transition_weight", c.harmonizer.transition_weight);
      c.harmonizer.chord_change_penalty = h.value("chord_change_penalty", c.harmonizer.chord_change_penalty);
    }
    c.frame_rate = j.value("frame_rate", c.frame_rate);
    c.sigma = j.value("sigma", c.sigma);
    c.max_window = j.value("max_window", c.max_window);
    c.p_backward = j.value("p_backward", c.p_backward);
    c.seed = j.value("seed", c.seed);
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    c.intro_bars = j.value("intro_bars", c.intro_bars);
    c.reject_fewer_lines = j.value("reject_fewer_lines", c.reject_fewer_lines);
    if (j.contains("prompt") && !j["prompt"].is_null()) c.prompt = j["prompt"].get<std::string>();
    if (j.contains("section_prompts")) {
      c.section_prompts = j["section_prompts"].get<std::map<std::string, std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

enum class Stage { kLoad, kValidate, kSelect, kRegister, kHarmonize, kCondition, kPlan, kRender, kMix, kEval };

constexpr std::array<std::string_view, 10> kStageNames = {
    "load", "validate", "select", "register", "harmonize", "condition", "plan", "render", "mix", "eval"};

inline std::string_view to_string(Stage s) { return kStageNames[static_cast<std::size_t>(s)]; }

inline std::optional<Stage> parse_stage(std::string_view name) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i) {
    if (kStageNames[i] == name) return static_cast<Stage>(i);
  }
  return std::nullopt;
}

/// A failure tagged with the stage it happened in.
class StageError : public Error {
 public:
  StageError(Stage stage, const Error& cause)
      : Error(cause.code(), "stage '" + std::string(to_string(stage)) + "': " + cause.what()),
        stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

namespace artifact {
constexpr const char* kScore = "score.json";
constexpr const char* kRegister = "register.json";
constexpr const char* kChords = "chords.txt";
constexpr const char* kKeys = "keys.txt";
constexpr const char* kBundle = "bundle.json";
constexpr const char* kPlan = "plan.json";
constexpr const char* kTrainingSlices = "training_slices.json";
constexpr const char* kAccompaniment = "accompaniment.wav";
constexpr const char* kEvents = "events.txt";
constexpr const char* kVocal = "vocal.wav";
constexpr const char* kMix = "mix.wav";
constexpr const char* kReportJson = "report.json";
constexpr const char* kReportText = "report.txt";
constexpr const char* kManifest = "manifest.json";
}  // namespace artifact

/// @brief Per-section keys from the chord chromagram of each section;
/// sections without chroma take the whole-song key.
inline std::vector<KeyLabel> chroma_section_keys(const ConditionBundle& bundle) {
  const KeyLabel global = estimate_key(bundle.chroma);
  std::vector<KeyLabel> keys;
  for (const auto& s : bundle.sections) {
    const auto [first, last] = frame_range(s.start, s.end, bundle.frame_rate, bundle.frames());
    const auto part = slice_rows(bundle.chroma, first, last);
    bool any = false;
    for (std::uint8_t v : part.data()) any = any || v != 0;
    keys.push_back(any ? estimate_key(part) : global);
  }
  return keys;
}

struct EvalReport {
  MatchReport rhythm;
  MatchReport onsets;
  MatchReport chord;
  double key_accuracy = 0.0;
  std::vector<KeyLabel> reference_keys;
  std::vector<KeyLabel> estimated_keys;
};

constexpr double kOnsetTolerance = 0.005;

/// @brief Scores rendered audio and its event log against the conditions
/// it was rendered from.
inline EvalReport evaluate_render(const ConditionBundle& bundle, const AudioBuffer& accompaniment,
                                  const std::vector<RenderEvent>& events) {
  EvalReport r;
  const auto logged = event_beat_times(events);
  r.rhythm = rhythm_f1(bundle.beats, logged);
  r.onsets = rhythm_f1(logged, detect_click_onsets(accompaniment), kOnsetTolerance);
  const auto measured = chroma_from_audio(accompaniment, bundle.frame_rate, bundle.frames());
  r.chord = chord_match(bundle.chroma, measured);
  r.reference_keys = section_keys(bundle);
  std::size_t hits = 0;
  for (const auto& s : bundle.sections) {
    const auto [first, last] = frame_range(s.start, s.end, bundle.frame_rate, bundle.frames());
    KeyLabel est{-1, Mode::kMajor};
    try {
      est = estimate_key(slice_rows(measured, first, last));
    } catch (const Error&) {
      // Silent section: no estimate, counted as a miss.
    }
    r.estimated_keys.push_back(est);
    hits += est == s.key ? 1 : 0;
  }
  r.key_accuracy = bundle.sections.empty()
                       ? 1.0
                       : static_cast<double>(hits) / static_cast<double>(bundle.sections.size());
  return r;
}

inline nlohmann::ordered_json report_to_json(const MatchReport& m) {
  return {{"true_positives", m.true_positives}, {"false_positives", m.false_positives},
          {"false_negatives", m.false_negatives}, {"precision", m.precision},
          {"recall", m.recall}, {"f1", m.f1}};
}

inline std::string key_or_none(const KeyLabel& k) { return k.tonic < 0 ? "none" : to_string(k); }

inline nlohmann::ordered_json eval_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["rhythm_f1"] = report_to_json(r.rhythm);
  j["onset_alignment_f1"] = report_to_json(r.onsets);
  j["chord_f1"] = report_to_json(r.chord);
  j["key_accuracy"] = r.key_accuracy;
  auto keys = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.reference_keys.size(); ++i) {
    keys.push_back({{"section", i},
                    {"reference", key_or_none(r.reference_keys[i])},
                    {"estimated", key_or_none(r.estimated_keys[i])}});
  }
  j["section_keys"] = std::move(keys);
  return j;
}

inline std::string eval_to_text(const EvalReport& r) {
  char line[160];
  std::string out = "metric                 value     tp     fp     fn\n";
  auto row = [&](const char* name, const MatchReport& m) {
    std::snprintf(line, sizeof(line), "%-20s %7.4f %6zu %6zu %6zu\n", name, m.f1, m.true_positives,
                  m.false_positives, m.false_negatives);
    out += line;
  };
  row("rhythm_f1", r.rhythm);
  row("onset_alignment_f1", r.onsets);
  row("chord_f1", r.chord);
  std::snprintf(line, sizeof(line), "%-20s %7.4f\n", "key_accuracy", r.key_accuracy);
  out += line;
  return out;
}

struct RunResult {
  nlohmann::ordered_json manifest;
  EvalReport report;
};

namespace detail {

inline std::vector<LyricsSheet> read_reference_bank(std::string_view text) {
  const auto doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::kParse, "invalid reference bank JSON");
  std::vector<LyricsSheet> bank;
  try {
    for (const auto& sheet : doc.at("sheets")) bank.push_back(read_lyrics(sheet.dump()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  return bank;
}

template <typename Fn>
auto in_stage(Stage stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const std::exception& e) {
    throw StageError(stage, Error(ErrorCode::kInvalidArgument, e.what()));
  }
}

}  // namespace detail

/// @brief Runs every stage from `from` onward. Stages before `from` are
/// replaced by loading their artifacts from the output directory, so an
/// edited chords.txt is picked up by `from = Stage::kCondition`.
inline RunResult run_pipeline(const PipelineConfig& config, Stage from = Stage::kLoad) {
  namespace fs = std::filesystem;
  detail::in_stage(Stage::kLoad, [&] { require_valid(config); });
  const fs::path out_dir(config.output_dir);
  detail::in_stage(Stage::kLoad, [&] {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create '" + out_dir.string() + "'");
  });
  auto out = [&](const char* name) { return out_dir / name; };
  const bool resume = from > Stage::kLoad;

  nlohmann::ordered_json symbolic;
  VocalScore score;
  ChordSequence chords;

  if (from <= Stage::kHarmonize) {
    std::optional<LyricsSheet> lyrics;
    std::vector<LyricsSheet> bank;
    detail::in_stage(Stage::kLoad, [&] {
      score = load_score_file(config.score_path, false);
      if (config.lyrics_path) lyrics = read_lyrics(read_text_file(*config.lyrics_path));
      if (config.reference_bank_path) bank = detail::read_reference_bank(read_text_file(*config.reference_bank_path));
    });
    detail::in_stage(Stage::kValidate, [&] {
      const auto violations = validate_score(score);
      if (!violations.empty()) {
        std::string text = std::to_string(violations.size()) + " violation(s); first: " + violations.front().message;
        throw Error(ErrorCode::kInvalidScore, text);
      }
    });
    detail::in_stage(Stage::kSelect, [&] {
      if (lyrics && !bank.empty()) {
        const auto choice = select_reference(*lyrics, bank, config.reject_fewer_lines);
        symbolic["reference"] = {{"index", choice.index},
                                 {"p_sent", choice.penalty.p_sent},
                                 {"p_prof", choice.penalty.p_prof},
                                 {"p_struct", choice.penalty.p_struct},
                                 {"total", choice.penalty.total}};
      } else {
        symbolic["reference"] = nullptr;
      }
    });
    detail::in_stage(Stage::kRegister, [&] {
      const auto decision = register_match(score, config.singers);
      score = apply_transpose(score, decision.delta);
      symbolic["register"] = {{"singer", decision.singer},
                              {"delta", decision.delta},
                              {"in_range", decision.in_range_count},
                              {"notes", score.notes.size()}};
      write_file(out(artifact::kRegister), symbolic.dump(2) + "\n");
    });
    detail::in_stage(Stage::kHarmonize, [&] {
      const bool add_intro = config.intro_bars > 0 &&
                             (score.sections.empty() || score.sections.front().label != SectionLabel::kIntro);
      if (config.chords_path) {
        chords = read_chords(read_text_file(*config.chords_path));
      } else {
        chords = harmonize(score, config.harmonizer);
        if (add_intro) chords = prepend_intro_chords(chords, opening_bar_seconds(score), config.intro_bars);
      }
      if (add_intro) score = prepend_intro_bars(score, config.intro_bars);
      for (auto& s : score.sections) {
        if (s.prompt) continue;
        const auto it = config.section_prompts.find(std::string(to_string(s.label)));
        if (it != config.section_prompts.end()) {
          s.prompt = it->second;
        } else if (config.prompt) {
          s.prompt = *config.prompt;
        }
      }
      write_file(out(artifact::kScore), write_score_text(score));
      write_file(out(artifact::kChords), write_chords(chords));
    });
  } else {
    detail::in_stage(Stage::kLoad, [&] {
      if (fs::exists(out(artifact::kRegister))) {
        symbolic = nlohmann::ordered_json::parse(read_text_file(out(artifact::kRegister)));
      }
    });
  }

  ConditionBundle bundle;
  if (from <= Stage::kCondition) {
    if (resume && from == Stage::kCondition) {
      detail::in_stage(Stage::kLoad, [&] {
        score = read_score_text(read_text_file(out(artifact::kScore)));
        chords = read_chords(read_text_file(out(artifact::kChords)));
      });
    }
    detail::in_stage(Stage::kCondition, [&] {
      std::vector<KeyLabel> keys(score.sections.size());
      const bool given = config.keys_path.has_value();
      if (given) keys = read_keys(read_text_file(*config.keys_path));
      bundle = build_condition_bundle(score, chords, keys, config.frame_rate, config.sigma);
      if (!given) {
        keys = chroma_section_keys(bundle);
        for (std::size_t i = 0; i < keys.size(); ++i) bundle.sections[i].key = keys[i];
      }
      write_file(out(artifact::kKeys), write_keys(keys));
      write_file(out(artifact::kBundle), write_bundle_json(bundle));
    });
  } else {
    detail::in_stage(Stage::kLoad, [&] {
      score = read_score_text(read_text_file(out(artifact::kScore)));
      bundle = read_bundle_json(read_text_file(out(artifact::kBundle)));
    });
  }

  std::vector<GenerationWindow> plan;
  if (from <= Stage::kPlan) {
    detail::in_stage(Stage::kPlan, [&] {
      plan = plan_inference(score, config.max_window);
      write_file(out(artifact::kPlan), write_plan_json(plan));
      write_file(out(artifact::kTrainingSlices),
                 write_training_slices_json(plan_training_slices(score, config.p_backward, config.seed, config.max_window)));
    });
  } else {
    detail::in_stage(Stage::kLoad, [&] { plan = read_plan_json(read_text_file(out(artifact::kPlan))); });
  }

  RenderResult rendered;
  if (from <= Stage::kRender) {
    detail::in_stage(Stage::kRender, [&] {
      StubGenerator generator(config.sample_rate);
      rendered = render_plan(generator, bundle, plan);
      write_file(out(artifact::kAccompaniment), write_wav(rendered.audio, WavEncoding::kFloat32));
      write_file(out(artifact::kEvents), write_event_log(rendered.events));
    });
  } else {
    detail::in_stage(Stage::kLoad, [&] {
      rendered.audio = read_wav(read_file_bytes(out(artifact::kAccompaniment)));
      rendered.events = read_event_log(read_text_file(out(artifact::kEvents)));
    });
  }

  if (from <= Stage::kMix) {
    detail::in_stage(Stage::kMix, [&] {
      const AudioBuffer vocal = config.vocal_path ? read_wav(read_file_bytes(*config.vocal_path))
                                                  : render_guide_vocal(score, config.sample_rate);
      write_file(out(artifact::kVocal), write_wav(vocal, WavEncoding::kFloat32));
      write_file(out(artifact::kMix), write_wav(mix(vocal, rendered.audio), WavEncoding::kFloat32));
    });
  }

  RunResult result;
  detail::in_stage(Stage::kEval, [&] {
    result.report = evaluate_render(bundle, rendered.audio, rendered.events);
    write_file(out(artifact::kReportJson), eval_to_json(result.report).dump(2) + "\n");
    write_file(out(artifact::kReportText), eval_to_text(result.report));
  });

  auto& m = result.manifest;
  m["format"] = "songpipe.manifest";
  m["version"] = 1;
  m["config"] = config_to_json(config);
  m["from_stage"] = to_string(from);
  m["symbolic"] = symbolic;
  m["duration"] = bundle.duration;
  m["frames"] = bundle.frames();
  m["windows"] = plan.size();
  m["artifacts"] = {artifact::kScore, artifact::kRegister, artifact::kChords, artifact::kKeys,
                    artifact::kBundle, artifact::kPlan, artifact::kTrainingSlices,
                    artifact::kAccompaniment, artifact::kEvents, artifact::kVocal, artifact::kMix,
                    artifact::kReportJson, artifact::kReportText};
  m["metrics"] = {{"rhythm_f1", result.report.rhythm.f1},
                  {"onset_alignment_f1", result.report.onsets.f1},
                  {"chord_f1", result.report.chord.f1},
                  {"key_accuracy", result.report.key_accuracy}};
  detail::in_stage(Stage::kEval, [&] { write_file(out(artifact::kManifest), m.dump(2) + "\n"); });
  return result;
}

}  // namespace songpipe
