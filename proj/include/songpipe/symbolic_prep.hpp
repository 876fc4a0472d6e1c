/**
 * @file symbolic_prep.hpp
 * @brief Reference-bank selection by weighted structural penalty, and
 *        octave register matching against singer tessituras.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "songpipe/error.hpp"
#include "songpipe/score.hpp"

namespace songpipe {

// ---------------------------------------------------------------------------
// Reference selection
// ---------------------------------------------------------------------------

constexpr double kSentenceWeight = 0.4;
constexpr double kProfileWeight = 0.4;
constexpr double kStructureWeight = 0.2;

struct PenaltyBreakdown {
  double p_sent = 0.0;
  double p_prof = 0.0;
  double p_struct = 0.0;
  /// +inf when the candidate is rejected for having fewer lines.
  double total = 0.0;
};

inline double weighted_penalty(double p_sent, double p_prof, double p_struct) {
  return kSentenceWeight * p_sent + kProfileWeight * p_prof + kStructureWeight * p_struct;
}

namespace detail {

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// @brief Structural incompatibility of `candidate` as a reference for `target`.
///
/// - p_sent: line-count difference over the larger line count.
/// - p_prof: per-line token counts, the shorter sequence padded with its
///   own median, mean absolute difference over the largest token count.
/// - p_struct: positionwise tag mismatches over the shared length plus one
///   per extra line, over the longer length.
inline PenaltyBreakdown penalty_score(const LyricsSheet& target, const LyricsSheet& candidate,
                                      bool reject_fewer_lines = false) {
  if (target.lines.empty() || candidate.lines.empty()) {
    throw Error(ErrorCode::kEmptyInput, "lyric sheet has no lines");
  }
  const std::size_t nt = target.lines.size();
  const std::size_t nc = candidate.lines.size();
  const std::size_t longer = std::max(nt, nc);
  const std::size_t shorter = std::min(nt, nc);

  PenaltyBreakdown out;
  out.p_sent = static_cast<double>(longer - shorter) / static_cast<double>(longer);

  std::vector<double> tt, tc;
  for (const auto& l : target.lines) tt.push_back(static_cast<double>(l.tokens.size()));
  for (const auto& l : candidate.lines) tc.push_back(static_cast<double>(l.tokens.size()));
  double max_tokens = 0.0;
  for (double v : tt) max_tokens = std::max(max_tokens, v);
  for (double v : tc) max_tokens = std::max(max_tokens, v);
  auto& short_seq = tt.size() < tc.size() ? tt : tc;
  const double pad = detail::median_of(short_seq);
  short_seq.resize(longer, pad);
  if (max_tokens > 0.0) {
    double sum = 0.0;
    for (std::size_t i = 0; i < longer; ++i) sum += std::abs(tt[i] - tc[i]);
    out.p_prof = sum / static_cast<double>(longer) / max_tokens;
  }

  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < shorter; ++i) {
    if (static_cast<int>(target.lines[i].tag) != static_cast<int>(candidate.lines[i].tag)) {
      ++mismatches;
    }
  }
  out.p_struct = static_cast<double>(mismatches + (longer - shorter)) / static_cast<double>(longer);

  out.total = (reject_fewer_lines && nc < nt)
                  ? std::numeric_limits<double>::infinity()
                  : weighted_penalty(out.p_sent, out.p_prof, out.p_struct);
  return out;
}

struct ReferenceChoice {
  std::size_t index = 0;
  PenaltyBreakdown penalty;
};

/// @brief Lowest-penalty candidate; ties go to the lowest index.
inline ReferenceChoice select_reference(const LyricsSheet& target,
                                        std::span<const LyricsSheet> bank,
                                        bool reject_fewer_lines = false) {
  if (bank.empty()) throw Error(ErrorCode::kEmptyInput, "reference bank is empty");
  std::optional<ReferenceChoice> best;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto p = penalty_score(target, bank[i], reject_fewer_lines);
    if (!std::isfinite(p.total)) continue;
    if (!best || p.total < best->penalty.total) best = ReferenceChoice{i, p};
  }
  if (!best) throw Error(ErrorCode::kNoCandidate, "every candidate was rejected");
  return *best;
}

// ---------------------------------------------------------------------------
// Register matching
// ---------------------------------------------------------------------------

struct SingerProfile {
  std::string name;
  int low = 0;
  int high = 127;
  bool operator==(const SingerProfile&) const = default;
};

inline std::vector<SingerProfile> default_singer_profiles() {
  return {{"male", 45, 64}, {"female", 55, 74}};
}

/// Octave shifts tried for every profile, in tie-break order among equal |delta|.
constexpr std::array<int, 3> kOctaveShifts = {-12, 0, 12};

struct RegisterDecision {
  std::string singer;
  int delta = 0;
  int in_range_count = 0;
  bool operator==(const RegisterDecision&) const = default;
};

inline int count_in_range(const VocalScore& score, const SingerProfile& profile, int delta) {
  int count = 0;
  for (const auto& n : score.notes) {
    const int p = n.pitch + delta;
    if (p >= profile.low && p <= profile.high) ++count;
  }
  return count;
}

/// Every (profile, shift) configuration with its coverage, profile-major.
inline std::vector<RegisterDecision> register_candidates(const VocalScore& score,
                                                         std::span<const SingerProfile> profiles) {
  std::vector<RegisterDecision> out;
  for (const auto& profile : profiles) {
    if (!(profile.low < profile.high)) {
      throw Error(ErrorCode::kInvalidArgument, "profile '" + profile.name + "' needs low < high");
    }
    for (int delta : kOctaveShifts) {
      out.push_back({profile.name, delta, count_in_range(score, profile, delta)});
    }
  }
  return out;
}

/// @brief Picks (singer, octave shift) with the most notes inside the
/// singer's tessitura; ties prefer the smaller |shift|, then the earlier
/// profile, then the downward shift.
inline RegisterDecision register_match(const VocalScore& score,
                                       std::span<const SingerProfile> profiles) {
  if (score.notes.empty()) throw Error(ErrorCode::kEmptyInput, "score has no notes");
  if (profiles.empty()) throw Error(ErrorCode::kInvalidArgument, "no singer profiles");
  const auto candidates = register_candidates(score, profiles);
  const RegisterDecision* best = nullptr;
  for (const auto& c : candidates) {
    if (best == nullptr || c.in_range_count > best->in_range_count ||
        (c.in_range_count == best->in_range_count && std::abs(c.delta) < std::abs(best->delta))) {
      best = &c;
    }
  }
  return *best;
}

/// @brief Shifts every pitch by `delta` semitones.
inline VocalScore apply_transpose(const VocalScore& score, int delta) {
  VocalScore out = score;
  for (auto& n : out.notes) {
    const int p = n.pitch + delta;
    if (p < 0 || p > 127) {
      throw Error(ErrorCode::kInvalidArgument,
                  "pitch " + std::to_string(n.pitch) + " shifted by " + std::to_string(delta) +
                      " leaves the MIDI range");
    }
    n.pitch = p;
  }
  return out;
}

}  // namespace songpipe
