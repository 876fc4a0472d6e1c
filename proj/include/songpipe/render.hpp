/**
 * @file render.hpp
 * @brief Deterministic stub accompaniment generator, final mix, and the
 *        two-column event log.
 *
 * The stub follows its conditions literally: a sine pad on the active triad
 * (octave 4) and a 1 kHz click on every beat. All oscillators run off a
 * 4096-entry sine table built with plain multiply/add arithmetic and a
 * 32-bit phase accumulator indexed by absolute sample number, so windows
 * rendered separately tile into the same samples as one full render.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "songpipe/audio.hpp"
#include "songpipe/chords.hpp"
#include "songpipe/conditioning.hpp"
#include "songpipe/error.hpp"
#include "songpipe/score.hpp"
#include "songpipe/window_planner.hpp"

namespace songpipe {

constexpr double kPadAmplitude = 0.2;
constexpr double kPadCrossfadeSeconds = 0.010;
constexpr double kClickFrequency = 1000.0;
constexpr double kClickSeconds = 0.010;
constexpr double kClickDecaySeconds = 0.0025;
constexpr double kClickAmplitude = 0.3;
constexpr double kDownbeatGain = 1.5;
constexpr double kClickThreshold = 0.5;
constexpr double kMixPeak = 0.95;

/// Equal-tempered C4..B4 at A4 = 440 Hz, rounded to 1e-6 Hz.
constexpr std::array<double, 12> kOctave4Hz = {
    261.625565, 277.182631, 293.664768, 311.126984, 329.627557, 349.228231,
    369.994423, 391.995436, 415.304698, 440.0,      466.163762, 493.883301};

namespace synth {

constexpr int kTableBits = 12;
constexpr std::size_t kTableSize = std::size_t{1} << kTableBits;

/// sin(2*pi*k/4096) for k in [0, 4096], by quarter-wave symmetry and a
/// 14-term Taylor series (error below 1e-16 on [0, pi/2]).
inline const std::array<float, kTableSize + 1>& sine_table() {
  static const auto table = [] {
    std::array<float, kTableSize + 1> t{};
    constexpr std::size_t quarter = kTableSize / 4;
    auto taylor = [](double x) {
      double term = x;
      double sum = x;
      for (int n = 1; n < 14; ++n) {
        term *= -x * x / ((2.0 * n) * (2.0 * n + 1.0));
        sum += term;
      }
      return sum;
    };
    for (std::size_t k = 0; k <= kTableSize; ++k) {
      const std::size_t m = k % kTableSize;
      const std::size_t q = m / quarter;
      const std::size_t r = m % quarter;
      const std::size_t folded = (q % 2 == 0) ? r : quarter - r;
      double v = taylor(std::numbers::pi * 0.5 * static_cast<double>(folded) /
                        static_cast<double>(quarter));
      if (q >= 2) v = -v;
      t[k] = static_cast<float>(v);
    }
    return t;
  }();
  return table;
}

inline std::uint32_t phase_increment(double hz, int sample_rate) {
  return static_cast<std::uint32_t>(std::llround(hz / sample_rate * 4294967296.0));
}

/// Oscillator value at a 32-bit phase, linearly interpolated.
inline float sine_at(std::uint32_t phase) {
  const auto& t = sine_table();
  const std::uint32_t idx = phase >> (32 - kTableBits);
  const float frac =
      static_cast<float>(phase & ((1u << (32 - kTableBits)) - 1)) * (1.0f / (1u << (32 - kTableBits)));
  return t[idx] + frac * (t[idx + 1] - t[idx]);
}

/// Phase after `n` samples; wraps modulo 2^32.
inline std::uint32_t phase_at(std::int64_t n, std::uint32_t increment) {
  return static_cast<std::uint32_t>(static_cast<std::uint64_t>(n) * increment);
}

inline std::int64_t sample_index(double seconds, int sample_rate) {
  return std::llround(seconds * sample_rate);
}

}  // namespace synth

// ---------------------------------------------------------------------------
// Event log
// ---------------------------------------------------------------------------

struct RenderEvent {
  /// Emitted sample divided by the sample rate.
  double time = 0.0;
  /// `beat`, `downbeat` or `chord:ROOT:quality`.
  std::string type;
  bool operator==(const RenderEvent&) const = default;
};

struct RenderResult {
  AudioBuffer audio;
  std::vector<RenderEvent> events;
};

inline std::string write_event_log(const std::vector<RenderEvent>& events) {
  std::string out;
  for (const auto& e : events) out += format_seconds(e.time) + "\t" + e.type + "\n";
  return out;
}

inline std::vector<RenderEvent> read_event_log(std::string_view text) {
  std::vector<RenderEvent> events;
  for_each_record(text, [&](int line_no, const std::vector<std::string_view>& f) {
    if (f.size() != 2) {
      throw Error(ErrorCode::kParse, "event line " + std::to_string(line_no) + ": expected 'time type'");
    }
    events.push_back({parse_double(f[0]), std::string(f[1])});
  });
  return events;
}

/// Times of beat and downbeat events.
inline std::vector<double> event_beat_times(const std::vector<RenderEvent>& events) {
  std::vector<double> out;
  for (const auto& e : events) {
    if (e.type == "beat" || e.type == "downbeat") out.push_back(e.time);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stub renderer
// ---------------------------------------------------------------------------

namespace detail {

struct Click {
  std::int64_t start = 0;
  bool downbeat = false;
};

/// Frames holding a local maximum of the beat curve at or above threshold.
inline std::vector<std::size_t> activation_peaks(const ConditionBundle& b) {
  std::vector<std::size_t> peaks;
  const std::size_t n = b.rhythm.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double a = b.rhythm(i, 0);
    if (a < kClickThreshold) continue;
    const bool rises = i == 0 || a > b.rhythm(i - 1, 0);
    const bool holds = i + 1 == n || a >= b.rhythm(i + 1, 0);
    if (rises && holds) peaks.push_back(i);
  }
  return peaks;
}

/// Chord whose triad matches a chroma row exactly.
inline std::optional<Chord> chord_of_row(const Matrix<std::uint8_t>& chroma, std::size_t row) {
  for (int c = 0; c < kChordVocabularySize; ++c) {
    const Chord chord = chord_from_index(c);
    bool match = true;
    for (int pc = 0; pc < 12 && match; ++pc) {
      match = (chroma(row, static_cast<std::size_t>(pc)) != 0) == triad_contains(chord, pc);
    }
    if (match) return chord;
  }
  return std::nullopt;
}

inline bool row_active(const ConditionBundle& b, std::int64_t frame, std::size_t pc) {
  return frame >= 0 && static_cast<std::size_t>(frame) < b.chroma.rows() &&
         b.chroma(static_cast<std::size_t>(frame), pc) != 0;
}

/// Box-filtered pitch-class activity around `t`: ramps linearly over one
/// crossfade length centered on each frame boundary.
inline double pad_gain(const ConditionBundle& b, std::size_t pc, double t) {
  const double h = 0.5 * kPadCrossfadeSeconds;
  const double fr = b.frame_rate;
  const auto lo = static_cast<std::int64_t>(std::floor((t - h) * fr));
  const auto hi = static_cast<std::int64_t>(std::floor((t + h) * fr));
  if (lo == hi) return row_active(b, lo, pc) ? 1.0 : 0.0;
  double covered = 0.0;
  for (std::int64_t f = lo; f <= hi; ++f) {
    if (!row_active(b, f, pc)) continue;
    const double a = std::max(t - h, static_cast<double>(f) / fr);
    const double z = std::min(t + h, static_cast<double>(f + 1) / fr);
    covered += std::max(0.0, z - a);
  }
  return covered / (2.0 * h);
}

}  // namespace detail

/// @brief Renders the window's span of the conditions as mono audio plus
/// the onsets it emitted inside the window.
inline RenderResult render_stub(const ConditionBundle& bundle, const GenerationWindow& window,
                                int sample_rate = kDefaultSampleRate) {
  if (sample_rate <= 0) throw Error(ErrorCode::kInvalidArgument, "sample rate must be > 0");
  if (!(window.start >= 0.0) || !(window.end > window.start) ||
      window.end > bundle.duration + 1e-9) {
    throw Error(ErrorCode::kShapeMismatch, "window [" + format_seconds(window.start) + ", " +
                                               format_seconds(window.end) +
                                               ") is not covered by the bundle");
  }
  if (bundle.chroma.rows() != bundle.rhythm.rows() || bundle.chroma.cols() != 12 ||
      bundle.rhythm.cols() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "bundle signals disagree on frame count");
  }
  const std::int64_t n0 = synth::sample_index(window.start, sample_rate);
  const std::int64_t n1 = synth::sample_index(window.end, sample_rate);
  RenderResult result;
  result.audio = AudioBuffer(sample_rate, 1, static_cast<std::size_t>(n1 - n0));
  auto& out = result.audio.channels.front();

  // Pad.
  std::array<std::uint32_t, 12> inc{};
  for (std::size_t pc = 0; pc < 12; ++pc) inc[pc] = synth::phase_increment(kOctave4Hz[pc], sample_rate);
  for (std::int64_t n = n0; n < n1; ++n) {
    const double t = static_cast<double>(n) / sample_rate;
    float acc = 0.0f;
    for (std::size_t pc = 0; pc < 12; ++pc) {
      const double g = detail::pad_gain(bundle, pc, t);
      if (g <= 0.0) continue;
      acc += static_cast<float>(kPadAmplitude * g) * synth::sine_at(synth::phase_at(n, inc[pc]));
    }
    out[static_cast<std::size_t>(n - n0)] = acc;
  }

  // Clicks, including tails of clicks that started before the window.
  const auto click_len = synth::sample_index(kClickSeconds, sample_rate);
  const double decay = 1.0 - 1.0 / (kClickDecaySeconds * sample_rate);
  const std::uint32_t click_inc = synth::phase_increment(kClickFrequency, sample_rate);
  std::vector<RenderEvent> beat_events;
  for (std::size_t frame : detail::activation_peaks(bundle)) {
    detail::Click click;
    click.start = synth::sample_index(frame_time(frame, bundle.frame_rate), sample_rate);
    click.downbeat = bundle.rhythm(frame, 1) >= kClickThreshold;
    if (click.start + click_len <= n0 || click.start >= n1) continue;
    const double amp = kClickAmplitude * (click.downbeat ? kDownbeatGain : 1.0);
    double env = 1.0;
    for (std::int64_t k = 0; k < click_len; ++k, env *= decay) {
      const std::int64_t n = click.start + k;
      if (n < n0 || n >= n1) continue;
      out[static_cast<std::size_t>(n - n0)] +=
          static_cast<float>(amp * env) * synth::sine_at(synth::phase_at(k, click_inc));
    }
    if (click.start >= n0) {
      beat_events.push_back({static_cast<double>(click.start) / sample_rate,
                             click.downbeat ? "downbeat" : "beat"});
    }
  }

  // Chord onsets.
  std::vector<RenderEvent> chord_events;
  for (std::size_t i = 0; i < bundle.chroma.rows(); ++i) {
    bool changed = i == 0;
    bool any = false;
    for (std::size_t pc = 0; pc < 12; ++pc) {
      any = any || bundle.chroma(i, pc) != 0;
      if (i > 0 && bundle.chroma(i, pc) != bundle.chroma(i - 1, pc)) changed = true;
    }
    if (!changed || !any) continue;
    const std::int64_t s = synth::sample_index(frame_time(i, bundle.frame_rate), sample_rate);
    if (s < n0 || s >= n1) continue;
    const auto chord = detail::chord_of_row(bundle.chroma, i);
    chord_events.push_back({static_cast<double>(s) / sample_rate,
                            chord ? "chord:" + to_string(*chord) : std::string("chord:?")});
  }

  result.events = std::move(beat_events);
  result.events.insert(result.events.end(), chord_events.begin(), chord_events.end());
  std::stable_sort(result.events.begin(), result.events.end(),
                   [](const RenderEvent& a, const RenderEvent& b) { return a.time < b.time; });
  return result;
}

/// Accompaniment generator contract: conditions, optional reference audio
/// and a window in, the window's audio out.
template <typename G>
concept AccompanimentGenerator =
    requires(G& g, const ConditionBundle& b, const AudioBuffer* reference, const GenerationWindow& w) {
      { g.generate(b, reference, w) } -> std::same_as<RenderResult>;
      { g.sample_rate() } -> std::convertible_to<int>;
    };

/// Ignores the reference; its output is already continuous across windows.
class StubGenerator {
 public:
  explicit StubGenerator(int sample_rate = kDefaultSampleRate) : sample_rate_(sample_rate) {}
  int sample_rate() const { return sample_rate_; }
  RenderResult generate(const ConditionBundle& bundle, const AudioBuffer* /*reference*/,
                        const GenerationWindow& window) const {
    return render_stub(bundle, window, sample_rate_);
  }

 private:
  int sample_rate_;
};

static_assert(AccompanimentGenerator<StubGenerator>);

/// @brief Runs every window in plan order, handing each the audio of its
/// reference window, and assembles the full-length accompaniment.
template <AccompanimentGenerator G>
RenderResult render_plan(G& generator, const ConditionBundle& bundle,
                         const std::vector<GenerationWindow>& plan) {
  const int sr = generator.sample_rate();
  RenderResult full;
  full.audio = AudioBuffer(sr, 1, static_cast<std::size_t>(synth::sample_index(bundle.duration, sr)));
  std::map<int, AudioBuffer> rendered;
  std::vector<GenerationWindow> ordered = plan;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const GenerationWindow& a, const GenerationWindow& b) { return a.order < b.order; });
  for (const auto& w : ordered) {
    const AudioBuffer* reference = nullptr;
    if (w.reference_window >= 0) {
      const auto it = rendered.find(w.reference_window);
      if (it == rendered.end()) {
        throw Error(ErrorCode::kPlanning, "window " + std::to_string(w.order) +
                                              " references window " +
                                              std::to_string(w.reference_window) +
                                              " before it exists");
      }
      reference = &it->second;
    }
    auto part = generator.generate(bundle, reference, w);
    if (part.audio.sample_rate != sr || part.audio.channel_count() != 1) {
      throw Error(ErrorCode::kShapeMismatch, "generator returned unexpected audio format");
    }
    const auto offset = synth::sample_index(w.start, sr);
    auto& dst = full.audio.channels.front();
    const auto& src = part.audio.channels.front();
    for (std::size_t i = 0; i < src.size(); ++i) {
      const auto n = static_cast<std::size_t>(offset) + i;
      if (n < dst.size()) dst[n] += src[i];
    }
    full.events.insert(full.events.end(), part.events.begin(), part.events.end());
    rendered.emplace(w.order, std::move(part.audio));
  }
  std::stable_sort(full.events.begin(), full.events.end(),
                   [](const RenderEvent& a, const RenderEvent& b) { return a.time < b.time; });
  return full;
}

// ---------------------------------------------------------------------------
// Guide vocal and mix
// ---------------------------------------------------------------------------

/// Sine at each note's pitch with 5 ms linear attack and release; stands in
/// for a synthesized singing voice.
inline AudioBuffer render_guide_vocal(const VocalScore& score, int sample_rate = kDefaultSampleRate,
                                      double amplitude = 0.25) {
  require_valid(score);
  const double duration = duration_seconds(score);
  AudioBuffer audio(sample_rate, 1, static_cast<std::size_t>(synth::sample_index(duration, sample_rate)));
  auto& out = audio.channels.front();
  const double ramp = 0.005 * sample_rate;
  for (const auto& note : score.notes) {
    const auto s = synth::sample_index(tick_to_seconds(score, note.onset_tick), sample_rate);
    const auto e = std::min<std::int64_t>(
        synth::sample_index(tick_to_seconds(score, note.end_tick()), sample_rate),
        static_cast<std::int64_t>(out.size()));
    const double hz = 440.0 * std::exp2((note.pitch - 69) / 12.0);
    const auto inc = synth::phase_increment(hz, sample_rate);
    for (std::int64_t n = s; n < e; ++n) {
      const double k = static_cast<double>(n - s);
      const double g = std::min({1.0, k / ramp, static_cast<double>(e - n) / ramp});
      out[static_cast<std::size_t>(n)] +=
          static_cast<float>(amplitude * g) * synth::sine_at(synth::phase_at(n - s, inc));
    }
  }
  return audio;
}

/// @brief Sample-wise sum, zero-padding the shorter input, scaled so the
/// peak is `target`. Silence stays silent.
inline AudioBuffer mix(const AudioBuffer& vocal, const AudioBuffer& accompaniment,
                       double target = kMixPeak) {
  if (vocal.sample_rate != accompaniment.sample_rate) {
    throw Error(ErrorCode::kInvalidArgument, "sample rates differ: " +
                                                 std::to_string(vocal.sample_rate) + " vs " +
                                                 std::to_string(accompaniment.sample_rate));
  }
  const int channels = std::max({1, vocal.channel_count(), accompaniment.channel_count()});
  const std::size_t frames = std::max(vocal.frames(), accompaniment.frames());
  std::vector<std::vector<double>> sum(static_cast<std::size_t>(channels),
                                       std::vector<double>(frames, 0.0));
  auto add = [&](const AudioBuffer& src) {
    for (int c = 0; c < channels; ++c) {
      if (src.channels.empty()) return;
      const auto& ch = src.channels[static_cast<std::size_t>(std::min(c, src.channel_count() - 1))];
      for (std::size_t i = 0; i < ch.size(); ++i) sum[static_cast<std::size_t>(c)][i] += ch[i];
    }
  };
  add(vocal);
  add(accompaniment);
  double peak = 0.0;
  for (const auto& ch : sum) {
    for (double v : ch) peak = std::max(peak, std::abs(v));
  }
  AudioBuffer out(vocal.sample_rate, channels, frames);
  const double scale = peak > 0.0 ? target / peak : 0.0;
  for (std::size_t c = 0; c < sum.size(); ++c) {
    for (std::size_t i = 0; i < frames; ++i) {
      out.channels[c][i] = static_cast<float>(sum[c][i] * scale);
    }
  }
  return out;
}

}  // namespace songpipe
