/**
 * @file harmonizer.hpp
 * @brief Melody harmonization: one triad per 4/4 bar chosen by Viterbi
 *        dynamic programming, plus the instrumental-intro chord rule.
 */
#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "songpipe/chords.hpp"
#include "songpipe/error.hpp"
#include "songpipe/score.hpp"

namespace songpipe {

struct HarmonizerWeights {
  double emission_weight = 1.0;
  double transition_weight = 0.1;
  double chord_change_penalty = 0.05;
};

inline void require_valid(const HarmonizerWeights& w) {
  if (!std::isfinite(w.emission_weight) || !std::isfinite(w.transition_weight) ||
      !std::isfinite(w.chord_change_penalty)) {
    throw Error(ErrorCode::kInvalidArgument, "harmonizer weights must be finite");
  }
  if (!(w.emission_weight > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "emission weight must be > 0");
  }
}

/// Duration (ticks) of each pitch class sounding inside each bar.
using BarProfile = std::array<double, 12>;

inline std::vector<BarProfile> bar_profiles(const VocalScore& score) {
  const Tick bar = ticks_per_bar(score);
  const Tick end = end_tick(score);
  const auto bars = static_cast<std::size_t>((end + bar - 1) / bar);
  std::vector<BarProfile> profiles(bars, BarProfile{});
  for (const auto& n : score.notes) {
    for (Tick t = n.onset_tick; t < n.end_tick();) {
      const Tick b = t / bar;
      const Tick stop = std::min(n.end_tick(), (b + 1) * bar);
      profiles[static_cast<std::size_t>(b)][static_cast<std::size_t>(pitch_class(n.pitch))] +=
          static_cast<double>(stop - t);
      t = stop;
    }
  }
  return profiles;
}

/// Fraction of the bar's sounding duration whose pitch class is in the triad.
inline double emission_score(const BarProfile& profile, const Chord& chord) {
  double total = 0.0;
  for (double d : profile) total += d;
  if (total <= 0.0) return 0.0;
  double inside = 0.0;
  for (int pc : triad_pitch_classes(chord)) inside += profile[static_cast<std::size_t>(pc)];
  return inside / total;
}

inline double transition_score(const Chord& from, const Chord& to, const HarmonizerWeights& w) {
  return w.transition_weight * common_tones(from, to) -
         (from == to ? 0.0 : w.chord_change_penalty);
}

inline bool is_rest_bar(const BarProfile& profile) {
  for (double d : profile) {
    if (d > 0.0) return false;
  }
  return true;
}

/// Total objective of a per-bar chord path.
inline double path_score(const std::vector<BarProfile>& profiles, const std::vector<Chord>& path,
                         const HarmonizerWeights& w) {
  double total = 0.0;
  for (std::size_t b = 0; b < path.size(); ++b) {
    total += w.emission_weight * emission_score(profiles[b], path[b]);
    if (b > 0) total += transition_score(path[b - 1], path[b], w);
  }
  return total;
}

/// @brief Per-bar chord indices maximizing emission plus transition score.
///
/// Rest bars repeat the previous chord (leading rest bars the first sounding
/// bar's chord), so the search runs over sounding bars only. Ties resolve to
/// the lower vocabulary index.
inline std::vector<Chord> harmonize_bars(const std::vector<BarProfile>& profiles,
                                         const HarmonizerWeights& w) {
  require_valid(w);
  std::vector<std::size_t> sounding;
  for (std::size_t b = 0; b < profiles.size(); ++b) {
    if (!is_rest_bar(profiles[b])) sounding.push_back(b);
  }
  if (sounding.empty()) throw Error(ErrorCode::kEmptyInput, "no sounding bars");

  constexpr int kN = kChordVocabularySize;
  std::array<Chord, kN> vocab;
  for (int i = 0; i < kN; ++i) vocab[static_cast<std::size_t>(i)] = chord_from_index(i);

  std::vector<std::array<double, kN>> best(sounding.size());
  std::vector<std::array<int, kN>> back(sounding.size());
  for (int c = 0; c < kN; ++c) {
    best[0][c] = w.emission_weight * emission_score(profiles[sounding[0]], vocab[c]);
    back[0][c] = -1;
  }
  for (std::size_t k = 1; k < sounding.size(); ++k) {
    const auto held = static_cast<double>(sounding[k] - sounding[k - 1] - 1);
    for (int c = 0; c < kN; ++c) {
      double top = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int p = 0; p < kN; ++p) {
        const double v = best[k - 1][p] + held * transition_score(vocab[p], vocab[p], w) +
                         transition_score(vocab[p], vocab[c], w);
        if (v > top) {
          top = v;
          arg = p;
        }
      }
      best[k][c] = top + w.emission_weight * emission_score(profiles[sounding[k]], vocab[c]);
      back[k][c] = arg;
    }
  }
  int state = 0;
  for (int c = 1; c < kN; ++c) {
    if (best.back()[c] > best.back()[state]) state = c;
  }
  std::vector<int> chosen(sounding.size());
  for (std::size_t k = sounding.size(); k-- > 0;) {
    chosen[k] = state;
    state = back[k][state];
  }

  std::vector<Chord> path(profiles.size());
  std::size_t k = 0;
  for (std::size_t b = 0; b < profiles.size(); ++b) {
    if (k < sounding.size() && sounding[k] == b) {
      path[b] = vocab[chosen[k++]];
    } else {
      path[b] = b == 0 || k == 0 ? vocab[chosen[0]] : path[b - 1];
    }
  }
  return path;
}

/// @brief Chord progression for a vocal score, one triad per bar.
inline ChordSequence harmonize(const VocalScore& score, const HarmonizerWeights& weights = {}) {
  require_valid(score);
  if (score.notes.empty()) throw Error(ErrorCode::kEmptyInput, "score has no notes");
  const auto path = harmonize_bars(bar_profiles(score), weights);
  const Tick bar = ticks_per_bar(score);
  const Tick end = end_tick(score);
  ChordSequence out;
  for (std::size_t b = 0; b < path.size(); ++b) {
    const Tick start = static_cast<Tick>(b) * bar;
    const Tick stop = std::min(end, start + bar);
    out.entries.push_back({tick_to_seconds(score, start), tick_to_seconds(score, stop), path[b]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Instrumental intro
// ---------------------------------------------------------------------------

constexpr int kIntroBars = 4;

/// Length of one 4/4 bar at the score's opening tempo.
inline double opening_bar_seconds(const VocalScore& score) {
  const auto us = score.tempo_map.empty() ? kDefaultMicrosPerQuarter
                                          : score.tempo_map.front().micros_per_quarter;
  return kBeatsPerBar * static_cast<double>(us) / 1e6;
}

/// @brief Prepends `bars` bars of intro whose chords duplicate the first
/// `bars` bars of the progression; the original shifts later by the same span.
/// A progression shorter than the intro is repeated to fill it.
inline ChordSequence prepend_intro_chords(const ChordSequence& chords, double bar_duration,
                                          int bars = kIntroBars) {
  require_valid(chords);
  if (bars < 0) throw Error(ErrorCode::kInvalidArgument, "bars must be >= 0");
  if (bars == 0) return chords;
  if (!(bar_duration > 0.0)) throw Error(ErrorCode::kInvalidArgument, "bar duration must be > 0");
  if (chords.entries.empty()) throw Error(ErrorCode::kEmptyInput, "empty progression");
  const double intro = bars * bar_duration;
  const double span = chords.entries.back().end;
  ChordSequence out;
  for (double offset = 0.0; offset < intro - 1e-9; offset += span) {
    for (const auto& e : chords.entries) {
      if (e.start + offset >= intro - 1e-9) break;
      out.entries.push_back({e.start + offset, std::min(e.end + offset, intro), e.chord});
    }
  }
  for (const auto& e : chords.entries) {
    out.entries.push_back({e.start + intro, e.end + intro, e.chord});
  }
  return out;
}

/// @brief Shifts the score `bars` bars later and opens it with an intro
/// section over the new empty bars, played at the opening tempo.
inline VocalScore prepend_intro_bars(const VocalScore& score, int bars = kIntroBars) {
  require_valid(score);
  if (bars < 0) throw Error(ErrorCode::kInvalidArgument, "bars must be >= 0");
  if (bars == 0) return score;
  const Tick offset = ticks_per_bar(score) * bars;
  VocalScore out = score;
  for (auto& n : out.notes) n.onset_tick += offset;
  for (std::size_t i = 1; i < out.tempo_map.size(); ++i) out.tempo_map[i].tick += offset;
  for (auto& s : out.sections) {
    s.start_tick += offset;
    s.end_tick += offset;
  }
  out.sections.insert(out.sections.begin(), Section{SectionLabel::kIntro, 0, offset, std::nullopt});
  return out;
}

}  // namespace songpipe
