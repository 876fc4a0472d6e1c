/**
 * @file score.hpp
 * @brief Symbolic vocal score: notes, tempo map, sections and lyrics.
 *
 * All times are in MIDI ticks. Meter is fixed to 4/4; anything else is a
 * validation violation. Conversion to seconds goes through the tempo map.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "songpipe/error.hpp"

namespace songpipe {

using Tick = std::int64_t;

constexpr int kDefaultTicksPerQuarter = 480;
constexpr std::int64_t kDefaultMicrosPerQuarter = 500000;
constexpr int kBeatsPerBar = 4;

// ---------------------------------------------------------------------------
// Section labels
// ---------------------------------------------------------------------------

/// @brief Closed set of structure labels. Integer values are the fixed
/// mapping used wherever tags are compared numerically.
enum class SectionLabel : int {
  kIntro = 0,
  kVerse = 1,
  kChorus = 2,
  kBridge = 3,
  kSolo = 4,
  kBreak = 5,
  kInst = 6,
  kOutro = 7,
};

constexpr std::array<std::string_view, 8> kSectionLabelNames = {
    "intro", "verse", "chorus", "bridge", "solo", "break", "inst", "outro"};

inline std::string_view to_string(SectionLabel label) {
  return kSectionLabelNames[static_cast<std::size_t>(label)];
}

inline std::optional<SectionLabel> parse_section_label(std::string_view text) {
  for (std::size_t i = 0; i < kSectionLabelNames.size(); ++i) {
    if (kSectionLabelNames[i] == text) return static_cast<SectionLabel>(i);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Score types
// ---------------------------------------------------------------------------

struct Note {
  Tick onset_tick = 0;
  Tick duration_ticks = 1;
  int pitch = 60;
  /// Absent on melisma continuation notes.
  std::optional<std::string> syllable;

  Tick end_tick() const { return onset_tick + duration_ticks; }
  bool operator==(const Note&) const = default;
};

struct TempoEntry {
  Tick tick = 0;
  std::int64_t micros_per_quarter = kDefaultMicrosPerQuarter;
  bool operator==(const TempoEntry&) const = default;
};

struct TimeSignature {
  int numerator = 4;
  int denominator = 4;
  bool operator==(const TimeSignature&) const = default;
};

struct Section {
  SectionLabel label = SectionLabel::kVerse;
  Tick start_tick = 0;
  Tick end_tick = 0;
  /// Free-text style description handed to external generators.
  std::optional<std::string> prompt;
  bool operator==(const Section&) const = default;
};

struct VocalScore {
  std::vector<Note> notes;
  std::vector<TempoEntry> tempo_map{TempoEntry{}};
  TimeSignature time_signature;
  int ticks_per_quarter = kDefaultTicksPerQuarter;
  std::vector<Section> sections;
  std::string title;

  bool operator==(const VocalScore&) const = default;
};

/// Last tick covered by any note or section.
inline Tick end_tick(const VocalScore& score) {
  Tick end = 0;
  for (const auto& n : score.notes) end = std::max(end, n.end_tick());
  for (const auto& s : score.sections) end = std::max(end, s.end_tick);
  return end;
}

inline Tick ticks_per_bar(const VocalScore& score) {
  return static_cast<Tick>(score.ticks_per_quarter) * kBeatsPerBar;
}

// ---------------------------------------------------------------------------
// Lyrics
// ---------------------------------------------------------------------------

struct LyricLine {
  SectionLabel tag = SectionLabel::kVerse;
  std::vector<std::string> tokens;
  bool operator==(const LyricLine&) const = default;
};

struct LyricsSheet {
  std::vector<LyricLine> lines;
  bool operator==(const LyricsSheet&) const = default;
};

namespace detail {

inline bool is_cjk_ideograph(char32_t cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) ||
         (cp >= 0xF900 && cp <= 0xFAFF) || (cp >= 0x20000 && cp <= 0x2FFFF) ||
         (cp >= 0x3040 && cp <= 0x30FF) ||  // kana
         (cp >= 0xAC00 && cp <= 0xD7AF);    // hangul syllables
}

// CJK punctuation, fullwidth forms and ideographic space separate tokens.
inline bool is_cjk_separator(char32_t cp) {
  return (cp >= 0x3000 && cp <= 0x303F) || (cp >= 0xFF00 && cp <= 0xFFEF);
}

/// Decodes one UTF-8 code point starting at `pos`; invalid bytes decode as
/// themselves so tokenization never fails.
inline char32_t next_code_point(std::string_view s, std::size_t& pos,
                                std::size_t& len) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t k) -> int {
    if (pos + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    len = 1;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0 && cont(1) >= 0) {
    len = 2;
    return static_cast<char32_t>(((b0 & 0x1F) << 6) | cont(1));
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) >= 0 && cont(2) >= 0) {
    len = 3;
    return static_cast<char32_t>(((b0 & 0x0F) << 12) | (cont(1) << 6) |
                                 cont(2));
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) >= 0 && cont(2) >= 0 && cont(3) >= 0) {
    len = 4;
    return static_cast<char32_t>(((b0 & 0x07) << 18) | (cont(1) << 12) |
                                 (cont(2) << 6) | cont(3));
  }
  len = 1;
  return b0;
}

}  // namespace detail

/// @brief Splits a lyric line into tokens.
///
/// Each visible CJK character is one token; everything else is split on
/// whitespace. Mixed lines get both treatments.
inline std::vector<std::string> tokenize_line(std::string_view line) {
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) tokens.push_back(std::move(word));
    word.clear();
  };
  std::size_t pos = 0;
  while (pos < line.size()) {
    std::size_t len = 1;
    const char32_t cp = detail::next_code_point(line, pos, len);
    const std::string_view bytes = line.substr(pos, len);
    if (cp == U' ' || cp == U'\t' || cp == U'\r' || cp == U'\n' ||
        detail::is_cjk_separator(cp)) {
      flush();
    } else if (detail::is_cjk_ideograph(cp)) {
      flush();
      tokens.emplace_back(bytes);
    } else {
      word.append(bytes);
    }
    pos += len;
  }
  flush();
  return tokens;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class ViolationKind {
  kTimeSignature,
  kTicksPerQuarter,
  kNotesUnsorted,
  kMonophony,
  kPitchRange,
  kNonPositiveDuration,
  kTempoMapEmpty,
  kTempoMapStart,
  kTempoMapUnsorted,
  kTempoValue,
  kSectionSpan,
  kSectionsNotContiguous,
  kSectionsCoverage,
};

struct Violation {
  ViolationKind kind;
  /// Index of the offending note, tempo entry or section; -1 for score-level.
  int index = -1;
  std::string message;
};

/// @brief Lists every invariant violation of `score`; empty iff valid.
inline std::vector<Violation> validate_score(const VocalScore& score) {
  std::vector<Violation> out;
  auto add = [&](ViolationKind kind, int index, std::string msg) {
    out.push_back({kind, index, std::move(msg)});
  };

  if (score.time_signature.numerator != 4 ||
      score.time_signature.denominator != 4) {
    add(ViolationKind::kTimeSignature, -1, "time signature must be 4/4");
  }
  if (score.ticks_per_quarter <= 0) {
    add(ViolationKind::kTicksPerQuarter, -1, "ticks_per_quarter must be > 0");
  }

  for (std::size_t i = 0; i < score.notes.size(); ++i) {
    const Note& n = score.notes[i];
    const int idx = static_cast<int>(i);
    if (n.pitch < 0 || n.pitch > 127) {
      add(ViolationKind::kPitchRange, idx, "pitch outside [0,127]");
    }
    if (n.duration_ticks < 1) {
      add(ViolationKind::kNonPositiveDuration, idx, "duration must be >= 1 tick");
    }
    if (n.onset_tick < 0) {
      add(ViolationKind::kNotesUnsorted, idx, "negative onset");
    }
    if (i > 0) {
      const Note& prev = score.notes[i - 1];
      if (n.onset_tick < prev.onset_tick) {
        add(ViolationKind::kNotesUnsorted, idx, "notes not sorted by onset");
      } else if (n.onset_tick < prev.end_tick()) {
        add(ViolationKind::kMonophony, idx, "monophony violated");
      }
    }
  }

  if (score.tempo_map.empty()) {
    add(ViolationKind::kTempoMapEmpty, -1, "tempo map is empty");
  } else {
    if (score.tempo_map.front().tick != 0) {
      add(ViolationKind::kTempoMapStart, 0, "first tempo entry not at tick 0");
    }
    for (std::size_t i = 0; i < score.tempo_map.size(); ++i) {
      if (score.tempo_map[i].micros_per_quarter <= 0) {
        add(ViolationKind::kTempoValue, static_cast<int>(i),
            "tempo must be > 0 us/quarter");
      }
      if (i > 0 && score.tempo_map[i].tick <= score.tempo_map[i - 1].tick) {
        add(ViolationKind::kTempoMapUnsorted, static_cast<int>(i),
            "tempo map not strictly sorted by tick");
      }
    }
  }

  for (std::size_t i = 0; i < score.sections.size(); ++i) {
    const Section& s = score.sections[i];
    if (s.start_tick >= s.end_tick) {
      add(ViolationKind::kSectionSpan, static_cast<int>(i),
          "section start must precede end");
    }
    if (i == 0 && s.start_tick != 0) {
      add(ViolationKind::kSectionsCoverage, 0, "first section must start at 0");
    }
    if (i > 0 && s.start_tick != score.sections[i - 1].end_tick) {
      add(ViolationKind::kSectionsNotContiguous, static_cast<int>(i),
          "sections not contiguous");
    }
  }
  Tick note_end = 0;
  for (const auto& n : score.notes) note_end = std::max(note_end, n.end_tick());
  const Tick section_end =
      score.sections.empty() ? 0 : score.sections.back().end_tick;
  if (note_end > section_end) {
    add(ViolationKind::kSectionsCoverage, -1,
        "sections do not cover the end of the score");
  }
  return out;
}

inline bool is_valid(const VocalScore& score) {
  return validate_score(score).empty();
}

inline void require_valid(const VocalScore& score) {
  const auto violations = validate_score(score);
  if (!violations.empty()) {
    throw Error(ErrorCode::kInvalidScore, violations.front().message);
  }
}

// ---------------------------------------------------------------------------
// Time conversion
// ---------------------------------------------------------------------------

/// @brief Converts a tick position to seconds through the tempo map.
///
/// Entries after `tick` are ignored; an empty map falls back to 120 BPM.
inline double tick_to_seconds(const VocalScore& score, Tick tick) {
  if (tick < 0) throw Error(ErrorCode::kInvalidArgument, "negative tick");
  if (score.ticks_per_quarter <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "ticks_per_quarter must be > 0");
  }
  const double tpq = static_cast<double>(score.ticks_per_quarter);
  double seconds = 0.0;
  Tick seg_start = 0;
  std::int64_t tempo = score.tempo_map.empty()
                           ? kDefaultMicrosPerQuarter
                           : score.tempo_map.front().micros_per_quarter;
  for (std::size_t i = 1; i < score.tempo_map.size(); ++i) {
    const TempoEntry& e = score.tempo_map[i];
    if (e.tick >= tick) break;
    seconds += static_cast<double>(e.tick - seg_start) * tempo / (tpq * 1e6);
    seg_start = e.tick;
    tempo = e.micros_per_quarter;
  }
  seconds += static_cast<double>(tick - seg_start) * tempo / (tpq * 1e6);
  return seconds;
}

inline double duration_seconds(const VocalScore& score) {
  return tick_to_seconds(score, end_tick(score));
}

/// Section spans in seconds, in score order.
struct SectionSpan {
  SectionLabel label;
  double start = 0.0;
  double end = 0.0;
};

inline std::vector<SectionSpan> section_spans(const VocalScore& score) {
  std::vector<SectionSpan> spans;
  spans.reserve(score.sections.size());
  for (const auto& s : score.sections) {
    spans.push_back({s.label, tick_to_seconds(score, s.start_tick),
                     tick_to_seconds(score, s.end_tick)});
  }
  return spans;
}

}  // namespace songpipe
