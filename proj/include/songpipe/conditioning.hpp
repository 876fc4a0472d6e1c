/**
 * @file conditioning.hpp
 * @brief Framewise conditioning signals derived from a vocal score and its
 *        chord progression: rhythm activation, chord chromagram, section
 *        keys, structure labels and pitch contour.
 *
 * Every signal shares one frame grid: frame i sits at time i / frame_rate
 * and T = ceil(duration * frame_rate).
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "songpipe/chords.hpp"
#include "songpipe/error.hpp"
#include "songpipe/matrix.hpp"
#include "songpipe/score.hpp"

namespace songpipe {

constexpr double kDefaultFrameRate = 50.0;
constexpr double kDefaultSigma = 0.05;

/// Gaussian bumps are evaluated out to this many sigmas; beyond it the
/// contribution is below 1.3e-14.
constexpr double kGaussianSupportSigmas = 8.0;

inline std::size_t frame_count(double duration, double frame_rate) {
  if (!(frame_rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "frame_rate must be > 0");
  if (duration < 0.0) throw Error(ErrorCode::kInvalidArgument, "negative duration");
  return static_cast<std::size_t>(std::ceil(duration * frame_rate - 1e-9));
}

inline double frame_time(std::size_t frame, double frame_rate) {
  return static_cast<double>(frame) / frame_rate;
}

struct BeatEvents {
  std::vector<double> beats;
  std::vector<double> downbeats;
};

/// @brief Quarter-note grid of a 4/4 score; every fourth beat from tick 0 is
/// a downbeat. Beats lie in [0, end of score).
inline BeatEvents beat_downbeat_events(const VocalScore& score) {
  require_valid(score);
  const Tick end = end_tick(score);
  if (end <= 0) throw Error(ErrorCode::kEmptyInput, "score has no duration");
  BeatEvents events;
  Tick k = 0;
  for (Tick t = 0; t < end; t += score.ticks_per_quarter, ++k) {
    const double s = tick_to_seconds(score, t);
    events.beats.push_back(s);
    if (k % kBeatsPerBar == 0) events.downbeats.push_back(s);
  }
  return events;
}

/// @brief Gaussian-smoothed beat (column 0) and downbeat (column 1) curves.
///
/// Each event is placed on its nearest frame, as in a binary indicator
/// sequence, and spreads exp(-d^2 / (2 sigma^2)) around that frame.
/// Overlapping bumps combine by max, so the event frame itself reads 1.0.
inline Matrix<double> rhythm_activation(std::span<const double> beats,
                                        std::span<const double> downbeats,
                                        double duration, double frame_rate, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be > 0");
  const std::size_t frames = frame_count(duration, frame_rate);
  Matrix<double> out(frames, 2, 0.0);
  const auto radius = static_cast<std::ptrdiff_t>(
      std::ceil(kGaussianSupportSigmas * sigma * frame_rate));

  auto splat = [&](std::span<const double> events, std::size_t column) {
    for (double t : events) {
      if (!(t >= 0.0) || t > duration + 1e-9) {
        throw Error(ErrorCode::kInvalidArgument, "event time outside [0, duration]");
      }
      if (frames == 0) continue;
      auto center = static_cast<std::ptrdiff_t>(std::llround(t * frame_rate));
      center = std::min<std::ptrdiff_t>(center, static_cast<std::ptrdiff_t>(frames) - 1);
      const double center_time = frame_time(static_cast<std::size_t>(center), frame_rate);
      const auto lo = std::max<std::ptrdiff_t>(0, center - radius);
      const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(frames) - 1,
                                               center + radius);
      for (auto i = lo; i <= hi; ++i) {
        const double d = frame_time(static_cast<std::size_t>(i), frame_rate) - center_time;
        const double v = i == center ? 1.0 : std::exp(-(d * d) / (2.0 * sigma * sigma));
        double& cell = out(static_cast<std::size_t>(i), column);
        cell = std::clamp(std::max(cell, v), 0.0, 1.0);
      }
    }
  };
  splat(beats, 0);
  splat(downbeats, 1);
  return out;
}

/// @brief Binary 12-bin chromagram: triad pitch classes are set on every
/// frame whose time falls inside a chord span.
inline Matrix<std::uint8_t> chord_chromagram(const ChordSequence& chords, double duration,
                                             double frame_rate) {
  require_valid(chords);
  if (!chords.entries.empty() && chords.entries.back().end > duration + 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "chords extend past the duration");
  }
  const std::size_t frames = frame_count(duration, frame_rate);
  Matrix<std::uint8_t> chroma(frames, 12, 0);
  for (const auto& e : chords.entries) {
    const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(e.start * frame_rate - 1e-9)));
    for (std::size_t i = first; i < frames; ++i) {
      const double t = frame_time(i, frame_rate);
      if (t >= e.end - 1e-12) break;
      if (t < e.start - 1e-12) continue;
      for (int pc : triad_pitch_classes(e.chord)) chroma(i, static_cast<std::size_t>(pc)) = 1;
    }
  }
  return chroma;
}

/// @brief MIDI pitch of the sounding note per frame, 0 where silent.
inline std::vector<double> pitch_contour_from_score(const VocalScore& score,
                                                    double frame_rate) {
  require_valid(score);
  const std::size_t frames = frame_count(duration_seconds(score), frame_rate);
  std::vector<double> contour(frames, 0.0);
  for (const auto& n : score.notes) {
    const double start = tick_to_seconds(score, n.onset_tick);
    const double end = tick_to_seconds(score, n.end_tick());
    const auto first = static_cast<std::size_t>(std::ceil(start * frame_rate - 1e-9));
    for (std::size_t i = first; i < frames; ++i) {
      const double t = frame_time(i, frame_rate);
      if (t >= end - 1e-12) break;
      contour[i] = n.pitch;
    }
  }
  return contour;
}

/// @brief Moves each boundary to the nearest downbeat or section edge
/// (earlier target on exact ties). Result is sorted and deduplicated.
inline std::vector<double> snap_boundaries(std::span<const double> boundaries,
                                           std::span<const double> downbeats,
                                           std::span<const double> section_edges) {
  std::vector<double> targets(downbeats.begin(), downbeats.end());
  targets.insert(targets.end(), section_edges.begin(), section_edges.end());
  if (targets.empty()) throw Error(ErrorCode::kInvalidArgument, "no snap targets");
  std::sort(targets.begin(), targets.end());

  std::vector<double> out;
  out.reserve(boundaries.size());
  for (double b : boundaries) {
    auto it = std::lower_bound(targets.begin(), targets.end(), b);
    double best;
    if (it == targets.end()) {
      best = targets.back();
    } else if (it == targets.begin()) {
      best = *it;
    } else {
      const double after = *it;
      const double before = *(it - 1);
      best = (b - before) <= (after - b) ? before : after;
    }
    out.push_back(best);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Bundle
// ---------------------------------------------------------------------------

struct SectionCondition {
  SectionLabel label = SectionLabel::kVerse;
  double start = 0.0;
  double end = 0.0;
  KeyLabel key;
  std::optional<std::string> prompt;
  bool operator==(const SectionCondition&) const = default;
};

struct ConditionBundle {
  double frame_rate = kDefaultFrameRate;
  double sigma = kDefaultSigma;
  double duration = 0.0;
  /// T x 2: beat, downbeat activation in [0, 1].
  Matrix<double> rhythm;
  /// T x 12 binary pitch-class membership.
  Matrix<std::uint8_t> chroma;
  /// Per-section label, span and key; `key_per_section` indexes into this.
  std::vector<SectionCondition> sections;
  /// Framewise section-label index, -1 outside every section.
  std::vector<int> structure;
  /// Framewise MIDI pitch, 0 = silence.
  std::vector<double> pitch_contour;
  /// Event times the rhythm curves were built from.
  std::vector<double> beats;
  std::vector<double> downbeats;

  std::size_t frames() const { return rhythm.rows(); }
  bool operator==(const ConditionBundle&) const = default;
};

/// Chords with every boundary moved onto a downbeat or section edge; spans
/// that collapse are dropped.
inline ChordSequence snap_chords(const ChordSequence& chords, std::span<const double> downbeats,
                                 std::span<const double> section_edges) {
  ChordSequence out;
  for (const auto& e : chords.entries) {
    const double bounds[2] = {e.start, e.end};
    const auto snapped_start = snap_boundaries(std::span(bounds, 1), downbeats, section_edges);
    const auto snapped_end = snap_boundaries(std::span(bounds + 1, 1), downbeats, section_edges);
    if (snapped_start[0] < snapped_end[0]) {
      out.entries.push_back({snapped_start[0], snapped_end[0], e.chord});
    }
  }
  return out;
}

/// @brief Assembles all framewise signals on one shared frame grid.
///
/// `keys` holds one key per score section. `external_contour`, when given,
/// replaces the symbolic pitch contour and must have T frames.
inline ConditionBundle build_condition_bundle(
    const VocalScore& score, const ChordSequence& chords, const std::vector<KeyLabel>& keys,
    double frame_rate = kDefaultFrameRate, double sigma = kDefaultSigma,
    const std::optional<std::vector<double>>& external_contour = std::nullopt) {
  require_valid(score);
  require_valid(chords);
  if (keys.size() != score.sections.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "expected " + std::to_string(score.sections.size()) + " section keys, got " +
                    std::to_string(keys.size()));
  }

  ConditionBundle bundle;
  bundle.frame_rate = frame_rate;
  bundle.sigma = sigma;
  bundle.duration = duration_seconds(score);
  const std::size_t frames = frame_count(bundle.duration, frame_rate);

  auto events = beat_downbeat_events(score);
  bundle.beats = std::move(events.beats);
  bundle.downbeats = std::move(events.downbeats);
  bundle.rhythm =
      rhythm_activation(bundle.beats, bundle.downbeats, bundle.duration, frame_rate, sigma);

  std::vector<double> edges;
  for (std::size_t i = 0; i < score.sections.size(); ++i) {
    const auto& s = score.sections[i];
    const double start = tick_to_seconds(score, s.start_tick);
    const double end = tick_to_seconds(score, s.end_tick);
    bundle.sections.push_back({s.label, start, end, keys[i], s.prompt});
    edges.push_back(start);
    edges.push_back(end);
  }
  edges.push_back(0.0);
  edges.push_back(bundle.duration);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  const ChordSequence snapped = snap_chords(chords, bundle.downbeats, edges);
  bundle.chroma = chord_chromagram(snapped, bundle.duration, frame_rate);

  bundle.structure.assign(frames, -1);
  for (const auto& s : bundle.sections) {
    for (std::size_t i = 0; i < frames; ++i) {
      const double t = frame_time(i, frame_rate);
      if (t >= s.start - 1e-12 && t < s.end - 1e-12) {
        bundle.structure[i] = static_cast<int>(s.label);
      }
    }
  }

  if (external_contour) {
    if (external_contour->size() != frames) {
      throw Error(ErrorCode::kShapeMismatch, "external pitch contour length differs from T");
    }
    bundle.pitch_contour = *external_contour;
  } else {
    bundle.pitch_contour = pitch_contour_from_score(score, frame_rate);
  }
  return bundle;
}

/// Per-section keys in section order, as stored in the bundle.
inline std::vector<KeyLabel> section_keys(const ConditionBundle& bundle) {
  std::vector<KeyLabel> keys;
  for (const auto& s : bundle.sections) keys.push_back(s.key);
  return keys;
}

/// Frame range [first, last) covered by a time span.
inline std::pair<std::size_t, std::size_t> frame_range(double start, double end,
                                                       double frame_rate, std::size_t frames) {
  const auto first = std::min(frames, static_cast<std::size_t>(
                                          std::max(0.0, std::ceil(start * frame_rate - 1e-9))));
  const auto last = std::min(frames, static_cast<std::size_t>(
                                         std::max(0.0, std::ceil(end * frame_rate - 1e-9))));
  return {first, std::max(first, last)};
}

// ---------------------------------------------------------------------------
// Canonical text form (.bundle.json)
// ---------------------------------------------------------------------------

constexpr std::string_view kBundleFormatTag = "songpipe.bundle";

inline std::string write_bundle_json(const ConditionBundle& b) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["format"] = kBundleFormatTag;
  doc["version"] = 1;
  doc["frame_rate"] = b.frame_rate;
  doc["sigma"] = b.sigma;
  doc["duration"] = b.duration;
  doc["frames"] = b.frames();
  doc["beats"] = b.beats;
  doc["downbeats"] = b.downbeats;
  auto sections = ordered_json::array();
  for (const auto& s : b.sections) {
    ordered_json j{{"label", to_string(s.label)},
                   {"start", s.start},
                   {"end", s.end},
                   {"key", to_string(s.key)}};
    if (s.prompt) j["prompt"] = *s.prompt;
    sections.push_back(std::move(j));
  }
  doc["sections"] = std::move(sections);
  std::vector<double> beat_col, downbeat_col;
  for (std::size_t i = 0; i < b.rhythm.rows(); ++i) {
    beat_col.push_back(b.rhythm(i, 0));
    downbeat_col.push_back(b.rhythm(i, 1));
  }
  doc["rhythm"] = {{"beat", beat_col}, {"downbeat", downbeat_col}};
  std::vector<std::string> chroma_rows;
  for (std::size_t i = 0; i < b.chroma.rows(); ++i) {
    std::string row(12, '0');
    for (std::size_t c = 0; c < 12; ++c) row[c] = b.chroma(i, c) ? '1' : '0';
    chroma_rows.push_back(std::move(row));
  }
  doc["chroma"] = chroma_rows;
  doc["structure"] = b.structure;
  doc["pitch_contour"] = b.pitch_contour;
  return doc.dump(1) + "\n";
}

inline ConditionBundle read_bundle_json(std::string_view text) {
  const auto doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::kParse, "invalid bundle JSON");
  try {
    if (doc.at("format").get<std::string>() != kBundleFormatTag) {
      throw Error(ErrorCode::kParse, "not a songpipe bundle document");
    }
    ConditionBundle b;
    b.frame_rate = doc.at("frame_rate").get<double>();
    b.sigma = doc.at("sigma").get<double>();
    b.duration = doc.at("duration").get<double>();
    const auto frames = doc.at("frames").get<std::size_t>();
    b.beats = doc.at("beats").get<std::vector<double>>();
    b.downbeats = doc.at("downbeats").get<std::vector<double>>();
    for (const auto& s : doc.at("sections")) {
      const auto label = parse_section_label(s.at("label").get<std::string>());
      const auto key = parse_key(s.at("key").get<std::string>());
      if (!label) throw Error(ErrorCode::kUnknownSectionLabel, s.at("label").dump());
      if (!key) throw Error(ErrorCode::kParse, "bad key " + s.at("key").dump());
      SectionCondition sc{*label, s.at("start").get<double>(), s.at("end").get<double>(), *key,
                          std::nullopt};
      if (s.contains("prompt")) sc.prompt = s.at("prompt").get<std::string>();
      b.sections.push_back(std::move(sc));
    }
    const auto beat_col = doc.at("rhythm").at("beat").get<std::vector<double>>();
    const auto downbeat_col = doc.at("rhythm").at("downbeat").get<std::vector<double>>();
    const auto chroma_rows = doc.at("chroma").get<std::vector<std::string>>();
    b.structure = doc.at("structure").get<std::vector<int>>();
    b.pitch_contour = doc.at("pitch_contour").get<std::vector<double>>();
    if (beat_col.size() != frames || downbeat_col.size() != frames ||
        chroma_rows.size() != frames || b.structure.size() != frames ||
        b.pitch_contour.size() != frames) {
      throw Error(ErrorCode::kShapeMismatch, "bundle signals disagree on frame count");
    }
    b.rhythm = Matrix<double>(frames, 2);
    b.chroma = Matrix<std::uint8_t>(frames, 12);
    for (std::size_t i = 0; i < frames; ++i) {
      b.rhythm(i, 0) = beat_col[i];
      b.rhythm(i, 1) = downbeat_col[i];
      if (chroma_rows[i].size() != 12) throw Error(ErrorCode::kParse, "chroma row width");
      for (std::size_t c = 0; c < 12; ++c) b.chroma(i, c) = chroma_rows[i][c] == '1' ? 1 : 0;
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

}  // namespace songpipe
