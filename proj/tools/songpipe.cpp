// songpipe command-line tool: one subcommand per pipeline stage plus `run`.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "songpipe/songpipe.hpp"

namespace fs = std::filesystem;
using namespace songpipe;

namespace {

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

std::vector<SingerProfile> load_singers(const std::string& path) {
  if (path.empty()) return default_singer_profiles();
  const auto j = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kParse, "invalid singer profile JSON");
  std::vector<SingerProfile> out;
  try {
    for (const auto& s : j.at("singers")) {
      out.push_back({s.at("name").get<std::string>(), s.at("low").get<int>(), s.at("high").get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> lines;
  std::string text = read_text_file(path);
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
    pos = nl + 1;
  }
  return lines;
}

std::vector<std::string> phonemes_of(const std::vector<std::string>& lines) {
  std::vector<std::string> out;
  for (const auto& l : lines) {
    for (auto f : split_fields(l)) out.emplace_back(f);
  }
  return out;
}

double chords_end(const ChordSequence& c) { return c.entries.empty() ? 0.0 : c.entries.back().end; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"songpipe: symbolic song-generation backbone"};
  app.require_subcommand(1);

  // validate
  std::string v_score;
  auto* validate = app.add_subcommand("validate", "Check a vocal score against its invariants");
  validate->add_option("score", v_score, "Score file (.mid or .json)")->required();

  // harmonize
  std::string h_score, h_out;
  int h_intro = 0;
  HarmonizerWeights h_weights;
  auto* harm = app.add_subcommand("harmonize", "One triad per bar by dynamic programming");
  harm->add_option("score", h_score)->required();
  harm->add_option("-o,--out", h_out, "chords.txt destination (default stdout)");
  harm->add_option("--intro-bars", h_intro, "Prepend an intro duplicating the first N bars");
  harm->add_option("--emission-weight", h_weights.emission_weight);
  harm->add_option("--transition-weight", h_weights.transition_weight);
  harm->add_option("--change-penalty", h_weights.chord_change_penalty);

  // register
  std::string r_score, r_out, r_singers;
  auto* reg = app.add_subcommand("register", "Octave shift and singer with the best tessitura fit");
  reg->add_option("score", r_score)->required();
  reg->add_option("--singers", r_singers, "JSON {\"singers\": [{name, low, high}]}");
  reg->add_option("-o,--out", r_out, "Write the transposed score here");

  // select
  std::string s_lyrics, s_bank;
  bool s_reject = false;
  auto* sel = app.add_subcommand("select", "Pick the reference lyric sheet with the lowest penalty");
  sel->add_option("lyrics", s_lyrics)->required();
  sel->add_option("bank", s_bank, "JSON {\"sheets\": [...]}")->required();
  sel->add_flag("--reject-fewer-lines", s_reject, "Reject candidates with fewer lines than the target");

  // condition
  std::string c_score, c_chords, c_keys, c_out;
  double c_fr = kDefaultFrameRate, c_sigma = kDefaultSigma;
  auto* cond = app.add_subcommand("condition", "Build the framewise condition bundle");
  cond->add_option("--score", c_score)->required();
  cond->add_option("--chords", c_chords)->required();
  cond->add_option("--keys", c_keys, "One key per section (default: estimated from the chords)");
  cond->add_option("--frame-rate", c_fr);
  cond->add_option("--sigma", c_sigma);
  cond->add_option("-o,--out", c_out, "bundle.json destination (default stdout)");

  // plan
  std::string p_score, p_out, p_slices;
  double p_max = kMaxWindowSeconds, p_backward = kBackwardSwapProbability;
  std::uint64_t p_seed = 0;
  auto* plan = app.add_subcommand("plan", "Print the ordered generation windows");
  plan->add_option("score", p_score)->required();
  plan->add_option("--max-window", p_max);
  plan->add_option("-o,--out", p_out, "Also write plan.json here");
  plan->add_option("--training-slices", p_slices, "Write seeded training slices here");
  plan->add_option("--p-backward", p_backward);
  plan->add_option("--seed", p_seed);

  // render
  std::string rn_bundle, rn_plan, rn_out, rn_events;
  int rn_rate = kDefaultSampleRate;
  auto* render = app.add_subcommand("render", "Stub-render the accompaniment window by window");
  render->add_option("--bundle", rn_bundle)->required();
  render->add_option("--plan", rn_plan, "plan.json (default: one window over the whole bundle)");
  render->add_option("--sample-rate", rn_rate);
  render->add_option("-o,--out", rn_out)->required();
  render->add_option("--events", rn_events, "Event log destination");

  // mix
  std::string m_vocal, m_acc, m_out;
  bool m_pcm16 = false;
  auto* mixer = app.add_subcommand("mix", "Sum vocal and accompaniment, peak-normalize to 0.95");
  mixer->add_option("--vocal", m_vocal)->required();
  mixer->add_option("--accompaniment", m_acc)->required();
  mixer->add_option("-o,--out", m_out)->required();
  mixer->add_flag("--pcm16", m_pcm16, "Write 16-bit PCM instead of float");

  // beats
  std::string b_audio, b_detected, b_out;
  double b_window = 0.05, b_threshold = -40.0, b_duration = 0.0;
  auto* beats = app.add_subcommand("beats", "Fill a beat grid through vocal-silent regions");
  beats->add_option("--audio", b_audio, "Vocal WAV used for voice activity")->required();
  beats->add_option("--detected", b_detected, "Detected beats, `time [position]` per line")->required();
  beats->add_option("--window", b_window);
  beats->add_option("--threshold-db", b_threshold);
  beats->add_option("--duration", b_duration, "Song length (default: audio length)");
  beats->add_option("-o,--out", b_out);

  // eval
  std::string e_ref_beats, e_est_beats, e_ref_keys, e_est_keys, e_ref_chords, e_est_chords;
  std::string e_ref_lines, e_hyp_lines, e_bundle, e_audio, e_events, e_json;
  double e_tol = kRhythmTolerance, e_fr = kDefaultFrameRate;
  auto* eval = app.add_subcommand("eval", "Rhythm F1, Key Accuracy, Chord F1 and PER");
  eval->add_option("--ref-beats", e_ref_beats);
  eval->add_option("--est-beats", e_est_beats);
  eval->add_option("--tolerance", e_tol);
  eval->add_option("--ref-keys", e_ref_keys);
  eval->add_option("--est-keys", e_est_keys);
  eval->add_option("--ref-chords", e_ref_chords);
  eval->add_option("--est-chords", e_est_chords);
  eval->add_option("--frame-rate", e_fr);
  eval->add_option("--ref-lines", e_ref_lines, "Reference phonemes, one lyric line per text line");
  eval->add_option("--hyp-lines", e_hyp_lines);
  eval->add_option("--bundle", e_bundle, "Score rendered audio against this bundle");
  eval->add_option("--audio", e_audio);
  eval->add_option("--events", e_events);
  eval->add_option("--json", e_json, "Machine-readable report destination");

  // run
  std::string run_config, run_score, run_out, run_from = "load";
  std::optional<std::uint64_t> run_seed;
  auto* run = app.add_subcommand("run", "Whole pipeline from one configuration");
  run->add_option("--config", run_config, "JSON configuration file");
  run->add_option("--score", run_score, "Overrides the configured score");
  run->add_option("--out", run_out, "Overrides the output directory");
  run->add_option("--seed", run_seed);
  run->add_option("--from", run_from, "Resume at: condition, plan, render, mix or eval")
      ->check(CLI::IsMember({"load", "condition", "plan", "render", "mix", "eval"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      const auto score = load_score_file(v_score, false);
      const auto violations = validate_score(score);
      for (const auto& v : violations) std::cout << v.message << "\n";
      if (violations.empty()) std::cout << "ok\n";
      return violations.empty() ? 0 : 1;
    }
    if (*harm) {
      const auto score = load_score_file(h_score);
      auto chords = harmonize(score, h_weights);
      if (h_intro > 0) chords = prepend_intro_chords(chords, opening_bar_seconds(score), h_intro);
      emit(write_chords(chords), h_out);
      return 0;
    }
    if (*reg) {
      const auto score = load_score_file(r_score);
      const auto singers = load_singers(r_singers);
      const auto d = register_match(score, singers);
      std::cout << "singer " << d.singer << "\ndelta " << d.delta << "\nin_range " << d.in_range_count
                << "/" << score.notes.size() << "\n";
      if (!r_out.empty()) {
        write_file(r_out, write_score(apply_transpose(score, d.delta), format_for_path(r_out)));
      }
      return 0;
    }
    if (*sel) {
      const auto target = read_lyrics(read_text_file(s_lyrics));
      const auto bank = detail::read_reference_bank(read_text_file(s_bank));
      const auto choice = select_reference(target, bank, s_reject);
      std::printf("index %zu\np_sent %.6f\np_prof %.6f\np_struct %.6f\ntotal %.6f\n", choice.index,
                  choice.penalty.p_sent, choice.penalty.p_prof, choice.penalty.p_struct,
                  choice.penalty.total);
      return 0;
    }
    if (*cond) {
      const auto score = load_score_file(c_score);
      const auto chords = read_chords(read_text_file(c_chords));
      std::vector<KeyLabel> keys(score.sections.size());
      if (!c_keys.empty()) keys = read_keys(read_text_file(c_keys));
      auto bundle = build_condition_bundle(score, chords, keys, c_fr, c_sigma);
      if (c_keys.empty()) {
        const auto estimated = chroma_section_keys(bundle);
        for (std::size_t i = 0; i < estimated.size(); ++i) bundle.sections[i].key = estimated[i];
      }
      emit(write_bundle_json(bundle), c_out);
      return 0;
    }
    if (*plan) {
      const auto score = load_score_file(p_score);
      const auto windows = plan_inference(score, p_max);
      std::cout << format_plan_table(windows, &score);
      if (!p_out.empty()) write_file(p_out, write_plan_json(windows));
      if (!p_slices.empty()) {
        write_file(p_slices, write_training_slices_json(plan_training_slices(score, p_backward, p_seed, p_max)));
      }
      return 0;
    }
    if (*render) {
      const auto bundle = read_bundle_json(read_text_file(rn_bundle));
      std::vector<GenerationWindow> windows;
      if (rn_plan.empty()) {
        GenerationWindow w;
        w.end = bundle.duration;
        windows.push_back(w);
      } else {
        windows = read_plan_json(read_text_file(rn_plan));
      }
      StubGenerator generator(rn_rate);
      const auto result = render_plan(generator, bundle, windows);
      write_file(rn_out, write_wav(result.audio, WavEncoding::kFloat32));
      if (!rn_events.empty()) write_file(rn_events, write_event_log(result.events));
      return 0;
    }
    if (*mixer) {
      const auto vocal = read_wav(read_file_bytes(m_vocal));
      const auto acc = read_wav(read_file_bytes(m_acc));
      write_file(m_out, write_wav(mix(vocal, acc), m_pcm16 ? WavEncoding::kPcm16 : WavEncoding::kFloat32));
      return 0;
    }
    if (*beats) {
      const auto audio = read_wav(read_file_bytes(b_audio));
      const auto detected = read_beat_grid(read_text_file(b_detected));
      const auto segments = detect_voiced_segments(audio, b_window, b_threshold);
      const double duration = b_duration > 0.0 ? b_duration : audio.duration();
      std::optional<std::vector<std::vector<double>>> downbeats;
      if (!detected.downbeats.empty()) downbeats = beats_per_segment(detected.downbeats, segments);
      const auto grid = interpolate_beats(beats_per_segment(detected.beats, segments), segments,
                                          duration, downbeats);
      emit(write_beat_grid(grid), b_out);
      return 0;
    }
    if (*eval) {
      nlohmann::ordered_json report;
      std::string table;
      char line[200];
      auto add_match = [&](const char* name, const MatchReport& m) {
        report[name] = report_to_json(m);
        std::snprintf(line, sizeof(line), "%-20s %7.4f  P=%.4f R=%.4f  tp=%zu fp=%zu fn=%zu\n", name,
                      m.f1, m.precision, m.recall, m.true_positives, m.false_positives,
                      m.false_negatives);
        table += line;
      };
      if (!e_ref_beats.empty() || !e_est_beats.empty()) {
        if (e_ref_beats.empty() || e_est_beats.empty()) {
          throw Error(ErrorCode::kInvalidArgument, "--ref-beats and --est-beats go together");
        }
        const auto ref = read_beat_grid(read_text_file(e_ref_beats));
        const auto est = read_beat_grid(read_text_file(e_est_beats));
        add_match("rhythm_f1", rhythm_f1(ref.beats, est.beats, e_tol));
      }
      if (!e_ref_keys.empty() || !e_est_keys.empty()) {
        const auto ref = read_keys(read_text_file(e_ref_keys));
        const auto est = read_keys(read_text_file(e_est_keys));
        const double acc = key_accuracy(ref, est);
        report["key_accuracy"] = acc;
        std::snprintf(line, sizeof(line), "%-20s %7.4f\n", "key_accuracy", acc);
        table += line;
      }
      if (!e_ref_chords.empty() || !e_est_chords.empty()) {
        const auto ref = read_chords(read_text_file(e_ref_chords));
        const auto est = read_chords(read_text_file(e_est_chords));
        const double duration = std::max(chords_end(ref), chords_end(est));
        add_match("chord_f1", chord_match(chord_chromagram(ref, duration, e_fr),
                                          chord_chromagram(est, duration, e_fr)));
      }
      if (!e_ref_lines.empty() || !e_hyp_lines.empty()) {
        const auto ref = phonemes_of(dedup_lines(read_lines(e_ref_lines)));
        const auto hyp = phonemes_of(dedup_lines(read_lines(e_hyp_lines)));
        const double rate = per(ref, hyp);
        report["per"] = rate;
        std::snprintf(line, sizeof(line), "%-20s %7.4f\n", "per", rate);
        table += line;
      }
      if (!e_bundle.empty()) {
        if (e_audio.empty() || e_events.empty()) {
          throw Error(ErrorCode::kInvalidArgument, "--bundle needs --audio and --events");
        }
        const auto bundle = read_bundle_json(read_text_file(e_bundle));
        const auto audio = read_wav(read_file_bytes(e_audio));
        const auto events = read_event_log(read_text_file(e_events));
        const auto r = evaluate_render(bundle, audio, events);
        report["render"] = eval_to_json(r);
        table += eval_to_text(r);
      }
      if (report.empty()) throw Error(ErrorCode::kInvalidArgument, "nothing to evaluate");
      std::cout << table;
      if (!e_json.empty()) write_file(e_json, report.dump(2) + "\n");
      return 0;
    }
    if (*run) {
      PipelineConfig config;
      if (!run_config.empty()) {
        config = config_from_json(read_text_file(run_config), fs::path(run_config).parent_path());
      }
      if (!run_score.empty()) config.score_path = run_score;
      if (!run_out.empty()) config.output_dir = run_out;
      if (run_seed) config.seed = *run_seed;
      const auto result = run_pipeline(config, *parse_stage(run_from));
      std::cout << eval_to_text(result.report);
      std::cout << "manifest " << (fs::path(config.output_dir) / artifact::kManifest).string() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "songpipe: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
