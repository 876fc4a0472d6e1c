/**
 * @file beat_inference.hpp
 * @brief Full-song beat grid reconstruction from per-segment beat detections,
 *        interpolating through vocal-silent gaps.
 *
 * Beat detection itself is external; this module consumes detected beats
 * per voiced segment. It also provides an energy-gate voice activity
 * detector and a band-limited click onset detector for synthetic audio.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "songpipe/audio.hpp"
#include "songpipe/chords.hpp"
#include "songpipe/conditioning.hpp"
#include "songpipe/error.hpp"

namespace songpipe {

struct VoicedSegment {
  double start = 0.0;
  double end = 0.0;
  bool operator==(const VoicedSegment&) const = default;
};

struct BeatGrid {
  std::vector<double> beats;
  std::vector<double> downbeats;
  bool operator==(const BeatGrid&) const = default;
};

/// Segments closer than this are merged by the voice activity detector.
constexpr double kSegmentMergeGap = 0.2;

/// @brief Energy-gated voice activity: windows whose RMS is within
/// `threshold_db` of the loudest window are voiced.
inline std::vector<VoicedSegment> detect_voiced_segments(const AudioBuffer& audio,
                                                         double window, double threshold_db) {
  if (audio.frames() == 0) throw Error(ErrorCode::kEmptyInput, "zero-length audio");
  if (!(window > 0.0)) throw Error(ErrorCode::kInvalidArgument, "window must be > 0");
  const auto samples = mono_mix(audio);
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(window * audio.sample_rate)));
  const std::size_t count = (samples.size() + hop - 1) / hop;

  std::vector<double> rms(count, 0.0);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t lo = k * hop;
    const std::size_t hi = std::min(samples.size(), lo + hop);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += static_cast<double>(samples[i]) * samples[i];
    rms[k] = std::sqrt(acc / static_cast<double>(hi - lo));
  }
  const double peak = *std::max_element(rms.begin(), rms.end());
  if (peak <= 0.0) return {};

  const double rate = audio.sample_rate;
  std::vector<VoicedSegment> segments;
  for (std::size_t k = 0; k < count; ++k) {
    const bool voiced = rms[k] > 0.0 && 20.0 * std::log10(rms[k] / peak) >= threshold_db;
    if (!voiced) continue;
    const double start = static_cast<double>(k * hop) / rate;
    const double end = static_cast<double>(std::min(samples.size(), (k + 1) * hop)) / rate;
    if (!segments.empty() && start - segments.back().end < kSegmentMergeGap) {
      segments.back().end = end;
    } else {
      segments.push_back({start, end});
    }
  }
  return segments;
}

namespace detail {

inline double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

inline double median_interval(std::span<const double> beats) {
  std::vector<double> diffs;
  for (std::size_t i = 1; i < beats.size(); ++i) diffs.push_back(beats[i] - beats[i - 1]);
  return median(std::move(diffs));
}

}  // namespace detail

/// Harmonic mean of two inter-beat intervals.
inline double blend_intervals(double a, double b) { return 2.0 * a * b / (a + b); }

/// @brief Builds a beat grid over [0, total_duration] from per-segment beats.
///
/// Segments with fewer than two beats carry no tempo evidence and are
/// treated as silence. Gap beats continue the preceding segment's phase at
/// the harmonic mean of the neighbours' median intervals and stop half an
/// interval short of the next detected beat. The leading gap extends the
/// first segment backwards, the trailing gap extends the last forwards.
///
/// Downbeats: with `voiced_downbeats` (per segment, a subset of that
/// segment's beats) flagged beats are kept and counting restarts at each;
/// otherwise every fourth beat from the first detected beat is a downbeat.
/// Counting continues through gaps either way.
inline BeatGrid interpolate_beats(
    const std::vector<std::vector<double>>& voiced_beats,
    std::span<const VoicedSegment> segments, double total_duration,
    const std::optional<std::vector<std::vector<double>>>& voiced_downbeats = std::nullopt) {
  if (voiced_beats.size() != segments.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one beat list per segment required");
  }
  if (voiced_downbeats && voiced_downbeats->size() != segments.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one downbeat list per segment required");
  }
  if (!(total_duration > 0.0)) throw Error(ErrorCode::kInvalidArgument, "duration must be > 0");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!(segments[i].start < segments[i].end)) {
      throw Error(ErrorCode::kInvalidArgument, "segment start must precede end");
    }
    if (i > 0 && segments[i].start < segments[i - 1].end) {
      throw Error(ErrorCode::kInvalidArgument, "segments overlap or are unsorted");
    }
  }

  std::vector<std::size_t> evidence;
  for (std::size_t i = 0; i < voiced_beats.size(); ++i) {
    const auto& b = voiced_beats[i];
    for (std::size_t k = 1; k < b.size(); ++k) {
      if (!(b[k] > b[k - 1])) throw Error(ErrorCode::kInvalidArgument, "beats not increasing");
    }
    if (b.size() >= 2) evidence.push_back(i);
  }
  if (evidence.empty()) {
    throw Error(ErrorCode::kNoTempoEvidence, "no voiced segment has two or more beats");
  }
  for (std::size_t j = 1; j < evidence.size(); ++j) {
    if (!(voiced_beats[evidence[j]].front() > voiced_beats[evidence[j - 1]].back())) {
      throw Error(ErrorCode::kInvalidArgument, "beats not increasing across segments");
    }
  }

  // kind: 0 = interpolated, 1 = detected (counted), 2 = flagged downbeat,
  // 3 = detected in a segment whose flags say it is not a downbeat.
  struct Slot {
    double time;
    int kind;
  };
  std::vector<Slot> slots;
  auto detected_kind = [&](std::size_t seg, double t) {
    if (!voiced_downbeats || (*voiced_downbeats)[seg].empty()) return 1;
    const auto& d = (*voiced_downbeats)[seg];
    return std::find(d.begin(), d.end(), t) != d.end() ? 2 : 3;
  };

  const auto& first_beats = voiced_beats[evidence.front()];
  const double first_ibi = detail::median_interval(first_beats);
  const double first = first_beats.front();
  const auto lead = static_cast<long long>(std::floor((first + 1e-9) / first_ibi));
  for (long long n = lead; n >= 1; --n) {
    slots.push_back({std::max(0.0, first - static_cast<double>(n) * first_ibi), 0});
  }

  for (std::size_t j = 0; j < evidence.size(); ++j) {
    const std::size_t seg = evidence[j];
    const auto& beats = voiced_beats[seg];
    for (double t : beats) slots.push_back({t, detected_kind(seg, t)});
    const double last = beats.back();
    const double ibi = detail::median_interval(beats);
    if (j + 1 < evidence.size()) {
      const auto& next = voiced_beats[evidence[j + 1]];
      const double d = blend_intervals(ibi, detail::median_interval(next));
      for (long long n = 1;; ++n) {
        const double t = last + static_cast<double>(n) * d;
        if (t > next.front() - 0.5 * d + 1e-9) break;
        slots.push_back({t, 0});
      }
    } else {
      for (long long n = 1;; ++n) {
        const double t = last + static_cast<double>(n) * ibi;
        if (t > total_duration + 1e-9) break;
        slots.push_back({std::min(t, total_duration), 0});
      }
    }
  }

  // Bar position of the first detected beat: 0 unless the first evidence
  // segment flags a later downbeat.
  const auto first_detected = static_cast<std::size_t>(lead);
  int pos = 0;
  if (voiced_downbeats) {
    const auto& flags = (*voiced_downbeats)[evidence.front()];
    if (!flags.empty()) {
      const auto it = std::find(first_beats.begin(), first_beats.end(), flags.front());
      if (it != first_beats.end()) {
        const auto m = static_cast<int>(it - first_beats.begin());
        pos = (kBeatsPerBar - m % kBeatsPerBar) % kBeatsPerBar;
      }
    }
  }
  BeatGrid grid;
  grid.beats.reserve(slots.size());
  int position = ((pos - static_cast<int>(first_detected)) % kBeatsPerBar + kBeatsPerBar) % kBeatsPerBar;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (i > 0) position = (position + 1) % kBeatsPerBar;
    if (slots[i].kind == 2) position = 0;
    const bool downbeat = slots[i].kind == 2 || (position == 0 && slots[i].kind != 3);
    grid.beats.push_back(slots[i].time);
    if (downbeat) grid.downbeats.push_back(slots[i].time);
  }
  return grid;
}

/// Splits sorted beat times into one list per segment; beats outside every
/// segment are dropped.
inline std::vector<std::vector<double>> beats_per_segment(std::span<const double> beats,
                                                          std::span<const VoicedSegment> segments) {
  std::vector<std::vector<double>> out(segments.size());
  for (double t : beats) {
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (t >= segments[i].start && t <= segments[i].end) {
        out[i].push_back(t);
        break;
      }
    }
  }
  return out;
}

inline BeatEvents grid_to_events(const BeatGrid& grid) { return {grid.beats, grid.downbeats}; }

// ---------------------------------------------------------------------------
// Two-column beat annotation text: `time position`, position 1 = downbeat
// ---------------------------------------------------------------------------

inline std::string write_beat_grid(const BeatGrid& grid) {
  std::string out;
  std::size_t d = 0;
  std::ptrdiff_t last_downbeat = -1;
  std::ptrdiff_t first_downbeat = -1;
  for (std::size_t i = 0; i < grid.beats.size(); ++i) {
    if (std::find(grid.downbeats.begin(), grid.downbeats.end(), grid.beats[i]) != grid.downbeats.end()) {
      first_downbeat = static_cast<std::ptrdiff_t>(i);
      break;
    }
  }
  for (std::size_t i = 0; i < grid.beats.size(); ++i) {
    const double t = grid.beats[i];
    while (d < grid.downbeats.size() && grid.downbeats[d] < t) ++d;
    const bool is_down = d < grid.downbeats.size() && grid.downbeats[d] == t;
    int position;
    const auto idx = static_cast<std::ptrdiff_t>(i);
    if (is_down) {
      position = 1;
      last_downbeat = idx;
    } else if (last_downbeat >= 0) {
      position = static_cast<int>((idx - last_downbeat) % kBeatsPerBar) + 1;
    } else if (first_downbeat >= 0) {
      position = kBeatsPerBar - static_cast<int>((first_downbeat - idx - 1) % kBeatsPerBar);
    } else {
      position = static_cast<int>((idx + 1) % kBeatsPerBar) + 1;
    }
    if (!is_down && position == 1) position = kBeatsPerBar + 1;
    out += format_seconds(t) + "\t" + std::to_string(position) + "\n";
  }
  return out;
}

/// Accepts `time position` or bare `time` lines; position 1 marks a downbeat.
inline BeatGrid read_beat_grid(std::string_view text) {
  BeatGrid grid;
  for_each_record(text, [&](int line_no, const std::vector<std::string_view>& f) {
    if (f.size() > 2) {
      throw Error(ErrorCode::kParse, "beat line " + std::to_string(line_no) + ": too many fields");
    }
    const double t = parse_double(f[0]);
    if (!grid.beats.empty() && !(t > grid.beats.back())) {
      throw Error(ErrorCode::kParse, "beat line " + std::to_string(line_no) + ": not increasing");
    }
    grid.beats.push_back(t);
    if (f.size() == 2 && parse_double(f[1]) == 1.0) grid.downbeats.push_back(t);
  });
  return grid;
}

// ---------------------------------------------------------------------------
// Click onset detection
// ---------------------------------------------------------------------------

struct OnsetDetectorOptions {
  double center_hz = 1000.0;
  double q = 4.0;
  int stages = 2;
  double smooth_seconds = 0.0005;
  double relative_threshold = 0.1;
  double min_separation = 0.05;
  // Reported onset: where the envelope rising into a peak first reaches
  // this fraction of it.
  double onset_fraction = 0.25;
};

/// @brief Times of energy peaks in a band around `center_hz`.
///
/// Cascaded band-pass biquads, squared and box-smoothed; local maxima above
/// `relative_threshold` of the global maximum survive, strongest first,
/// suppressing anything within `min_separation`.
inline std::vector<double> detect_click_onsets(const AudioBuffer& audio,
                                               const OnsetDetectorOptions& opt = {}) {
  const auto x = mono_mix(audio);
  if (x.empty()) return {};
  const double fs = audio.sample_rate;
  const double w0 = 2.0 * std::numbers::pi * opt.center_hz / fs;
  const double alpha = std::sin(w0) / (2.0 * opt.q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;

  std::vector<double> y(x.begin(), x.end());
  for (int stage = 0; stage < opt.stages; ++stage) {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (double& v : y) {
      const double in = v;
      const double out = b0 * in + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = in;
      y2 = y1;
      y1 = out;
      v = out;
    }
  }
  std::vector<double> energy(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) energy[i] = y[i] * y[i];
  const auto half = static_cast<std::ptrdiff_t>(std::llround(opt.smooth_seconds * fs / 2.0));
  std::vector<double> env(x.size(), 0.0);
  {
    double acc = 0.0;
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    std::ptrdiff_t lo = 0, hi = -1;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const std::ptrdiff_t want_hi = std::min(n - 1, i + half);
      const std::ptrdiff_t want_lo = std::max<std::ptrdiff_t>(0, i - half);
      while (hi < want_hi) acc += energy[static_cast<std::size_t>(++hi)];
      while (lo < want_lo) acc -= energy[static_cast<std::size_t>(lo++)];
      env[static_cast<std::size_t>(i)] = acc / static_cast<double>(hi - lo + 1);
    }
  }
  const double top = *std::max_element(env.begin(), env.end());
  if (top <= 0.0) return {};
  const double threshold = opt.relative_threshold * top;

  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < env.size(); ++i) {
    if (env[i] >= threshold && env[i] > env[i - 1] && env[i] >= env[i + 1]) candidates.push_back(i);
  }
  std::vector<std::size_t> by_strength = candidates;
  std::stable_sort(by_strength.begin(), by_strength.end(),
                   [&](std::size_t a, std::size_t b) { return env[a] > env[b]; });
  const auto gap = static_cast<std::size_t>(std::llround(opt.min_separation * fs));
  std::vector<std::size_t> kept;
  for (std::size_t c : by_strength) {
    bool clear = true;
    for (std::size_t k : kept) {
      if ((c > k ? c - k : k - c) < gap) {
        clear = false;
        break;
      }
    }
    if (clear) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());
  std::vector<double> times;
  for (std::size_t k : kept) {
    std::size_t i = k;
    const std::size_t floor = k > gap / 2 ? k - gap / 2 : 0;
    while (i > floor && env[i - 1] >= opt.onset_fraction * env[k]) --i;
    times.push_back(static_cast<double>(i) / fs);
  }
  return times;
}

}  // namespace songpipe
