/**
 * @file chords.hpp
 * @brief Chord and key labels over the 24 major/minor triads, plus the
 *        `start end ROOT:quality` chord-sequence text format.
 */
#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "songpipe/error.hpp"

namespace songpipe {

enum class Quality : int { kMajor = 0, kMinor = 1 };
enum class Mode : int { kMajor = 0, kMinor = 1 };

constexpr std::array<std::string_view, 12> kPitchClassNames = {
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"};

constexpr int kChordVocabularySize = 24;

inline int pitch_class(int midi_pitch) { return ((midi_pitch % 12) + 12) % 12; }

/// Parses `C`, `C#`, `Db`, ... (case of the letter is significant).
inline std::optional<int> parse_pitch_class(std::string_view name) {
  if (name.empty()) return std::nullopt;
  static constexpr std::array<int, 7> kNatural = {9, 11, 0, 2, 4, 5, 7};  // A..G
  if (name[0] < 'A' || name[0] > 'G') return std::nullopt;
  int pc = kNatural[static_cast<std::size_t>(name[0] - 'A')];
  for (char c : name.substr(1)) {
    if (c == '#') {
      ++pc;
    } else if (c == 'b') {
      --pc;
    } else {
      return std::nullopt;
    }
  }
  return pitch_class(pc);
}

struct KeyLabel {
  int tonic = 0;
  Mode mode = Mode::kMajor;
  bool operator==(const KeyLabel&) const = default;
};

/// Index in (tonic, mode) order: C maj, C min, C# maj, ...
inline int key_index(const KeyLabel& key) {
  return key.tonic * 2 + static_cast<int>(key.mode);
}

inline std::string to_string(const KeyLabel& key) {
  return std::string(kPitchClassNames[static_cast<std::size_t>(key.tonic)]) +
         (key.mode == Mode::kMajor ? ":maj" : ":min");
}

struct Chord {
  int root = 0;
  Quality quality = Quality::kMajor;
  bool operator==(const Chord&) const = default;
};

/// Vocabulary index: roots C..B, major before minor.
inline int chord_index(const Chord& c) { return c.root * 2 + static_cast<int>(c.quality); }

inline Chord chord_from_index(int index) {
  return {index / 2, static_cast<Quality>(index % 2)};
}

inline std::array<int, 3> triad_pitch_classes(const Chord& c) {
  const int third = c.quality == Quality::kMajor ? 4 : 3;
  return {c.root, pitch_class(c.root + third), pitch_class(c.root + 7)};
}

inline bool triad_contains(const Chord& c, int pc) {
  for (int t : triad_pitch_classes(c)) {
    if (t == pc) return true;
  }
  return false;
}

inline int common_tones(const Chord& a, const Chord& b) {
  int count = 0;
  for (int t : triad_pitch_classes(a)) count += triad_contains(b, t) ? 1 : 0;
  return count;
}

inline std::string to_string(const Chord& c) {
  return std::string(kPitchClassNames[static_cast<std::size_t>(c.root)]) +
         (c.quality == Quality::kMajor ? ":maj" : ":min");
}

/// Parses `ROOT:maj` / `ROOT:min` (also used for key labels).
inline std::optional<Chord> parse_chord(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  const auto root = parse_pitch_class(text.substr(0, colon));
  const auto qual = text.substr(colon + 1);
  if (!root) return std::nullopt;
  if (qual == "maj") return Chord{*root, Quality::kMajor};
  if (qual == "min") return Chord{*root, Quality::kMinor};
  return std::nullopt;
}

inline std::optional<KeyLabel> parse_key(std::string_view text) {
  const auto c = parse_chord(text);
  if (!c) return std::nullopt;
  return KeyLabel{c->root, c->quality == Quality::kMajor ? Mode::kMajor : Mode::kMinor};
}

struct ChordEntry {
  double start = 0.0;
  double end = 0.0;
  Chord chord;
  bool operator==(const ChordEntry&) const = default;
};

struct ChordSequence {
  std::vector<ChordEntry> entries;
  bool operator==(const ChordSequence&) const = default;
};

/// Throws unless entries are sorted, non-overlapping and non-empty in time.
inline void require_valid(const ChordSequence& chords) {
  for (std::size_t i = 0; i < chords.entries.size(); ++i) {
    const auto& e = chords.entries[i];
    if (!(e.start < e.end) || !std::isfinite(e.start) || !std::isfinite(e.end)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "chord " + std::to_string(i) + " has empty span");
    }
    if (i > 0 && e.start < chords.entries[i - 1].end) {
      throw Error(ErrorCode::kInvalidArgument,
                  "chords " + std::to_string(i - 1) + " and " + std::to_string(i) +
                      " overlap");
    }
  }
}

// ---------------------------------------------------------------------------
// Text formats
// ---------------------------------------------------------------------------

/// Shortest round-trip decimal form; integral values keep a trailing ".0".
inline std::string format_seconds(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  std::string out(buf, ptr);
  if (out.find_first_of(".eEn") == std::string::npos) out += ".0";
  return out;
}

inline double parse_double(std::string_view text) {
  double value = 0.0;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    throw Error(ErrorCode::kParse, "bad number '" + std::string(text) + "'");
  }
  return value;
}

/// Splits on runs of spaces/tabs.
inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    const auto start = line.find_first_not_of(" \t\r", pos);
    if (start == std::string_view::npos) break;
    auto stop = line.find_first_of(" \t\r", start);
    if (stop == std::string_view::npos) stop = line.size();
    fields.push_back(line.substr(start, stop - start));
    pos = stop;
  }
  return fields;
}

/// Calls `fn(line_number, fields)` for every non-blank, non-`#` line.
template <typename Fn>
void for_each_record(std::string_view text, Fn&& fn) {
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty() || fields.front().starts_with('#')) continue;
    fn(line_no, fields);
  }
}

inline std::string write_chords(const ChordSequence& chords) {
  std::string out;
  for (const auto& e : chords.entries) {
    out += format_seconds(e.start) + " " + format_seconds(e.end) + " " +
           to_string(e.chord) + "\n";
  }
  return out;
}

inline ChordSequence read_chords(std::string_view text) {
  ChordSequence chords;
  for_each_record(text, [&](int line_no, const std::vector<std::string_view>& f) {
    if (f.size() != 3) {
      throw Error(ErrorCode::kParse, "chord line " + std::to_string(line_no) +
                                         ": expected 'start end ROOT:quality'");
    }
    const auto chord = parse_chord(f[2]);
    if (!chord) {
      throw Error(ErrorCode::kParse, "chord line " + std::to_string(line_no) +
                                         ": bad chord '" + std::string(f[2]) + "'");
    }
    chords.entries.push_back({parse_double(f[0]), parse_double(f[1]), *chord});
  });
  require_valid(chords);
  return chords;
}

inline std::string write_keys(const std::vector<KeyLabel>& keys) {
  std::string out;
  for (const auto& k : keys) out += to_string(k) + "\n";
  return out;
}

/// One `ROOT:maj|min` per line.
inline std::vector<KeyLabel> read_keys(std::string_view text) {
  std::vector<KeyLabel> keys;
  for_each_record(text, [&](int line_no, const std::vector<std::string_view>& f) {
    const auto key = parse_key(f.back());
    if (!key) {
      throw Error(ErrorCode::kParse, "key line " + std::to_string(line_no) + ": bad key");
    }
    keys.push_back(*key);
  });
  return keys;
}

}  // namespace songpipe
