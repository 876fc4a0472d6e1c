/**
 * @file score_io.hpp
 * @brief Standard MIDI File and canonical JSON reading/writing for scores,
 *        plus lyric sheet text formats.
 *
 * SMF subset: note-on/off, tempo (0x51), time signature (0x58), marker
 * (0x06, one per section start), lyric (0x05, attached to the note starting
 * at the same tick), track name (0x03, title), text (0x01, "prompt:" prefix
 * carries the section prompt), end of track (0x2F). Everything else is
 * skipped on read. Type 0 is written; types 0 and 1 are read track-merged.
 */
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "songpipe/error.hpp"
#include "songpipe/score.hpp"

namespace songpipe {

enum class ScoreFileFormat { kSmf, kCanonicalText };

using Bytes = std::vector<std::uint8_t>;

namespace smf {

constexpr std::uint8_t kMetaText = 0x01;
constexpr std::uint8_t kMetaTrackName = 0x03;
constexpr std::uint8_t kMetaLyric = 0x05;
constexpr std::uint8_t kMetaMarker = 0x06;
constexpr std::uint8_t kMetaEndOfTrack = 0x2F;
constexpr std::uint8_t kMetaTempo = 0x51;
constexpr std::uint8_t kMetaTimeSignature = 0x58;
constexpr std::string_view kPromptPrefix = "prompt:";
constexpr std::uint8_t kNoteOnVelocity = 100;

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ >= data_.size(); }

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint8_t peek() const {
    if (done()) throw Error(ErrorCode::kTruncated, "unexpected end of data");
    return data_[pos_];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    const std::uint32_t v = (std::uint32_t{data_[pos_]} << 24) |
                            (std::uint32_t{data_[pos_ + 1]} << 16) |
                            (std::uint32_t{data_[pos_ + 2]} << 8) |
                            std::uint32_t{data_[pos_ + 3]};
    pos_ += 4;
    return v;
  }
  /// Variable-length quantity, at most four bytes.
  std::uint32_t vlq() {
    std::uint32_t value = 0;
    for (int i = 0; i < 4; ++i) {
      if (done()) {
        throw Error(ErrorCode::kTruncated, "truncated variable-length quantity");
      }
      const std::uint8_t b = data_[pos_++];
      value = (value << 7) | (b & 0x7F);
      if ((b & 0x80) == 0) return value;
    }
    throw Error(ErrorCode::kParse, "variable-length quantity exceeds 4 bytes");
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw Error(ErrorCode::kTruncated, "unexpected end of data");
    }
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
  }
}

inline void put_vlq(Bytes& out, std::uint32_t v) {
  std::uint8_t buf[5];
  int n = 0;
  buf[n++] = static_cast<std::uint8_t>(v & 0x7F);
  while ((v >>= 7) != 0) buf[n++] = static_cast<std::uint8_t>(0x80 | (v & 0x7F));
  while (n > 0) out.push_back(buf[--n]);
}

/// One decoded event with its absolute tick and file order.
struct RawEvent {
  Tick tick = 0;
  int track = 0;
  int order = 0;
  std::uint8_t status = 0;  // channel status, or 0xFF for meta
  std::uint8_t meta_type = 0;
  std::uint8_t data1 = 0;
  std::uint8_t data2 = 0;
  std::string text;  // meta payload
};

struct ParsedFile {
  int ticks_per_quarter = 0;
  std::vector<RawEvent> events;
  Tick end_tick = 0;
};

inline int channel_data_length(std::uint8_t status) {
  switch (status & 0xF0) {
    case 0xC0:
    case 0xD0:
      return 1;
    default:
      return 2;
  }
}

inline void parse_track(std::span<const std::uint8_t> chunk, int track_index,
                        ParsedFile& file) {
  ByteReader in(chunk);
  Tick tick = 0;
  std::uint8_t running = 0;
  int order = 0;
  while (!in.done()) {
    tick += in.vlq();
    std::uint8_t status = in.peek();
    if (status & 0x80) {
      in.u8();
    } else if (running != 0) {
      status = running;
    } else {
      throw Error(ErrorCode::kParse, "data byte without running status");
    }

    RawEvent ev;
    ev.tick = tick;
    ev.track = track_index;
    ev.order = order++;
    ev.status = status;

    if (status == 0xFF) {
      running = 0;
      ev.meta_type = in.u8();
      const auto len = in.vlq();
      const auto payload = in.take(len);
      ev.text.assign(payload.begin(), payload.end());
      file.end_tick = std::max(file.end_tick, tick);
      if (ev.meta_type == kMetaEndOfTrack) break;
      file.events.push_back(std::move(ev));
    } else if (status == 0xF0 || status == 0xF7) {
      running = 0;
      in.take(in.vlq());
    } else if (status >= 0xF0) {
      throw Error(ErrorCode::kParse, "system message inside a track");
    } else {
      running = status;
      ev.data1 = in.u8();
      if (channel_data_length(status) == 2) ev.data2 = in.u8();
      if ((ev.data1 | ev.data2) & 0x80) {
        throw Error(ErrorCode::kParse, "channel data byte has high bit set");
      }
      file.end_tick = std::max(file.end_tick, tick);
      const std::uint8_t kind = status & 0xF0;
      if (kind == 0x80 || kind == 0x90) file.events.push_back(std::move(ev));
    }
  }
}

inline ParsedFile parse_file(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  if (bytes.size() < 14 || !std::equal(bytes.begin(), bytes.begin() + 4,
                                       std::string_view("MThd").begin())) {
    throw Error(ErrorCode::kMalformedHeader, "missing MThd chunk");
  }
  in.take(4);
  const std::uint32_t header_len = in.u32();
  if (header_len < 6) throw Error(ErrorCode::kMalformedHeader, "MThd too short");
  const std::uint16_t format = in.u16();
  const std::uint16_t tracks = in.u16();
  const std::uint16_t division = in.u16();
  if (format > 1) {
    throw Error(ErrorCode::kMalformedHeader, "only SMF type 0 and 1 supported");
  }
  if (format == 0 && tracks != 1) {
    throw Error(ErrorCode::kMalformedHeader, "type 0 file must have one track");
  }
  if ((division & 0x8000) != 0 || division == 0) {
    throw Error(ErrorCode::kMalformedHeader, "SMPTE or zero division unsupported");
  }
  in.take(header_len - 6);

  ParsedFile file;
  file.ticks_per_quarter = division;
  int track_index = 0;
  while (track_index < tracks) {
    const auto id = in.take(4);
    const std::uint32_t len = in.u32();
    const auto body = in.take(len);
    if (std::equal(id.begin(), id.end(), std::string_view("MTrk").begin())) {
      parse_track(body, track_index++, file);
    }
  }
  return file;
}

}  // namespace smf

/// @brief Decodes a Standard MIDI File into a score, validated unless
/// `validate` is false.
inline VocalScore read_smf(std::span<const std::uint8_t> bytes, bool validate = true) {
  if (bytes.empty()) throw Error(ErrorCode::kEmptyInput, "no bytes");
  smf::ParsedFile file = smf::parse_file(bytes);
  std::stable_sort(file.events.begin(), file.events.end(),
                   [](const smf::RawEvent& a, const smf::RawEvent& b) {
                     return std::tie(a.tick, a.track, a.order) <
                            std::tie(b.tick, b.track, b.order);
                   });

  VocalScore score;
  score.ticks_per_quarter = file.ticks_per_quarter;
  score.tempo_map.clear();

  std::map<int, std::deque<Tick>> active;  // pitch -> onset ticks
  std::map<Tick, std::string> lyrics;
  std::optional<std::string> title;
  struct OpenSection {
    SectionLabel label;
    Tick start;
    std::optional<std::string> prompt;
  };
  std::vector<OpenSection> markers;

  for (const auto& ev : file.events) {
    if (ev.status == 0xFF) {
      switch (ev.meta_type) {
        case smf::kMetaTempo: {
          if (ev.text.size() != 3) {
            throw Error(ErrorCode::kParse, "tempo meta must carry 3 bytes");
          }
          const auto b = [&](int i) {
            return static_cast<std::int64_t>(static_cast<unsigned char>(ev.text[i]));
          };
          const std::int64_t us = (b(0) << 16) | (b(1) << 8) | b(2);
          if (!score.tempo_map.empty() && score.tempo_map.back().tick == ev.tick) {
            score.tempo_map.back().micros_per_quarter = us;
          } else {
            score.tempo_map.push_back({ev.tick, us});
          }
          break;
        }
        case smf::kMetaTimeSignature: {
          if (ev.text.size() < 2) {
            throw Error(ErrorCode::kParse, "time signature meta too short");
          }
          const int num = static_cast<unsigned char>(ev.text[0]);
          const int den_pow = static_cast<unsigned char>(ev.text[1]);
          if (num != 4 || den_pow != 2) {
            throw Error(ErrorCode::kNonFourFour,
                        std::to_string(num) + "/2^" + std::to_string(den_pow));
          }
          break;
        }
        case smf::kMetaMarker: {
          const auto label = parse_section_label(ev.text);
          if (!label) throw Error(ErrorCode::kUnknownSectionLabel, ev.text);
          markers.push_back({*label, ev.tick, std::nullopt});
          break;
        }
        case smf::kMetaText:
          if (ev.text.starts_with(smf::kPromptPrefix) && !markers.empty() &&
              markers.back().start == ev.tick) {
            markers.back().prompt = ev.text.substr(smf::kPromptPrefix.size());
          }
          break;
        case smf::kMetaLyric:
          lyrics[ev.tick] = ev.text;
          break;
        case smf::kMetaTrackName:
          if (!title) title = ev.text;
          break;
        default:
          break;
      }
      continue;
    }
    const std::uint8_t kind = ev.status & 0xF0;
    const int pitch = ev.data1;
    if (kind == 0x90 && ev.data2 > 0) {
      active[pitch].push_back(ev.tick);
    } else {
      auto it = active.find(pitch);
      if (it == active.end() || it->second.empty()) continue;  // stray note-off
      const Tick onset = it->second.front();
      it->second.pop_front();
      score.notes.push_back({onset, ev.tick - onset, pitch, std::nullopt});
    }
  }
  for (const auto& [pitch, onsets] : active) {
    if (!onsets.empty()) {
      throw Error(ErrorCode::kUnmatchedNoteOn,
                  "pitch " + std::to_string(pitch) + " at tick " +
                      std::to_string(onsets.front()));
    }
  }

  std::stable_sort(score.notes.begin(), score.notes.end(),
                   [](const Note& a, const Note& b) { return a.onset_tick < b.onset_tick; });
  for (auto& note : score.notes) {
    if (auto it = lyrics.find(note.onset_tick); it != lyrics.end()) {
      note.syllable = it->second;
    }
  }

  if (score.tempo_map.empty() || score.tempo_map.front().tick != 0) {
    score.tempo_map.insert(score.tempo_map.begin(),
                           TempoEntry{0, kDefaultMicrosPerQuarter});
  }
  for (std::size_t i = 0; i < markers.size(); ++i) {
    const Tick end = i + 1 < markers.size() ? markers[i + 1].start : file.end_tick;
    score.sections.push_back({markers[i].label, markers[i].start, end, markers[i].prompt});
  }
  score.title = title.value_or("");
  if (validate) require_valid(score);
  return score;
}

/// @brief Encodes a valid score as a type-0 Standard MIDI File.
inline Bytes write_smf(const VocalScore& score) {
  require_valid(score);
  if (score.ticks_per_quarter > 0x7FFF) {
    throw Error(ErrorCode::kInvalidScore, "ticks_per_quarter exceeds SMF range");
  }

  struct Pending {
    Tick tick;
    int priority;
    int order;
    Bytes bytes;
  };
  std::vector<Pending> events;
  int order = 0;
  auto meta = [&](Tick tick, int priority, std::uint8_t type, std::string_view payload) {
    Bytes b{0xFF, type};
    smf::put_vlq(b, static_cast<std::uint32_t>(payload.size()));
    b.insert(b.end(), payload.begin(), payload.end());
    events.push_back({tick, priority, order++, std::move(b)});
  };

  if (!score.title.empty()) meta(0, 1, smf::kMetaTrackName, score.title);
  const std::string timesig{'\x04', '\x02', '\x18', '\x08'};
  meta(0, 1, smf::kMetaTimeSignature, timesig);
  for (const auto& t : score.tempo_map) {
    const auto us = static_cast<std::uint32_t>(t.micros_per_quarter);
    const std::string payload{static_cast<char>((us >> 16) & 0xFF),
                              static_cast<char>((us >> 8) & 0xFF),
                              static_cast<char>(us & 0xFF)};
    meta(t.tick, 1, smf::kMetaTempo, payload);
  }
  for (const auto& s : score.sections) {
    meta(s.start_tick, 1, smf::kMetaMarker, to_string(s.label));
    if (s.prompt) {
      meta(s.start_tick, 1, smf::kMetaText, std::string(smf::kPromptPrefix) + *s.prompt);
    }
  }
  for (const auto& n : score.notes) {
    if (n.syllable) meta(n.onset_tick, 2, smf::kMetaLyric, *n.syllable);
    const auto pitch = static_cast<std::uint8_t>(n.pitch);
    events.push_back({n.onset_tick, 3, order++, {0x90, pitch, smf::kNoteOnVelocity}});
    events.push_back({n.end_tick(), 0, order++, {0x80, pitch, 0x40}});
  }
  std::stable_sort(events.begin(), events.end(), [](const Pending& a, const Pending& b) {
    return std::tie(a.tick, a.priority, a.order) < std::tie(b.tick, b.priority, b.order);
  });

  Bytes track;
  Tick last = 0;
  for (const auto& ev : events) {
    smf::put_vlq(track, static_cast<std::uint32_t>(ev.tick - last));
    last = ev.tick;
    track.insert(track.end(), ev.bytes.begin(), ev.bytes.end());
  }
  const Tick end = std::max(end_tick(score), last);
  smf::put_vlq(track, static_cast<std::uint32_t>(end - last));
  track.insert(track.end(), {0xFF, smf::kMetaEndOfTrack, 0x00});

  Bytes out{'M', 'T', 'h', 'd'};
  smf::put_u32(out, 6);
  smf::put_u16(out, 0);
  smf::put_u16(out, 1);
  smf::put_u16(out, static_cast<std::uint16_t>(score.ticks_per_quarter));
  out.insert(out.end(), {'M', 'T', 'r', 'k'});
  smf::put_u32(out, static_cast<std::uint32_t>(track.size()));
  out.insert(out.end(), track.begin(), track.end());
  return out;
}

// ---------------------------------------------------------------------------
// Canonical JSON (.score.json)
// ---------------------------------------------------------------------------

constexpr std::string_view kScoreFormatTag = "songpipe.score";
constexpr int kScoreFormatVersion = 1;

inline nlohmann::ordered_json score_to_json(const VocalScore& score) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["format"] = kScoreFormatTag;
  doc["version"] = kScoreFormatVersion;
  doc["title"] = score.title;
  doc["ticks_per_quarter"] = score.ticks_per_quarter;
  doc["time_signature"] = {score.time_signature.numerator,
                           score.time_signature.denominator};
  ordered_json tempo = ordered_json::array();
  for (const auto& t : score.tempo_map) {
    tempo.push_back({{"tick", t.tick}, {"us_per_quarter", t.micros_per_quarter}});
  }
  doc["tempo_map"] = std::move(tempo);
  ordered_json sections = ordered_json::array();
  for (const auto& s : score.sections) {
    ordered_json j{{"label", to_string(s.label)},
                   {"start_tick", s.start_tick},
                   {"end_tick", s.end_tick}};
    if (s.prompt) j["prompt"] = *s.prompt;
    sections.push_back(std::move(j));
  }
  doc["sections"] = std::move(sections);
  ordered_json notes = ordered_json::array();
  for (const auto& n : score.notes) {
    ordered_json j{{"onset_tick", n.onset_tick},
                   {"duration_ticks", n.duration_ticks},
                   {"pitch", n.pitch}};
    if (n.syllable) j["syllable"] = *n.syllable;
    notes.push_back(std::move(j));
  }
  doc["notes"] = std::move(notes);
  return doc;
}

inline VocalScore score_from_json(const nlohmann::json& doc, bool validate = true) {
  try {
    VocalScore score;
    if (doc.contains("format") && doc.at("format").get<std::string>() != kScoreFormatTag) {
      throw Error(ErrorCode::kParse, "not a songpipe score document");
    }
    score.title = doc.value("title", std::string{});
    score.ticks_per_quarter = doc.value("ticks_per_quarter", kDefaultTicksPerQuarter);
    if (doc.contains("time_signature")) {
      const auto& ts = doc.at("time_signature");
      score.time_signature = {ts.at(0).get<int>(), ts.at(1).get<int>()};
      if (score.time_signature != TimeSignature{}) {
        throw Error(ErrorCode::kNonFourFour,
                    std::to_string(score.time_signature.numerator) + "/" +
                        std::to_string(score.time_signature.denominator));
      }
    }
    if (doc.contains("tempo_map")) {
      score.tempo_map.clear();
      for (const auto& t : doc.at("tempo_map")) {
        score.tempo_map.push_back(
            {t.at("tick").get<Tick>(), t.at("us_per_quarter").get<std::int64_t>()});
      }
    }
    for (const auto& s : doc.at("sections")) {
      const auto text = s.at("label").get<std::string>();
      const auto label = parse_section_label(text);
      if (!label) throw Error(ErrorCode::kUnknownSectionLabel, text);
      Section sec{*label, s.at("start_tick").get<Tick>(), s.at("end_tick").get<Tick>(),
                  std::nullopt};
      if (s.contains("prompt")) sec.prompt = s.at("prompt").get<std::string>();
      score.sections.push_back(std::move(sec));
    }
    for (const auto& n : doc.at("notes")) {
      Note note{n.at("onset_tick").get<Tick>(), n.at("duration_ticks").get<Tick>(),
                n.at("pitch").get<int>(), std::nullopt};
      if (n.contains("syllable")) note.syllable = n.at("syllable").get<std::string>();
      score.notes.push_back(std::move(note));
    }
    if (validate) require_valid(score);
    return score;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

inline std::string write_score_text(const VocalScore& score) {
  require_valid(score);
  return score_to_json(score).dump(2) + "\n";
}

inline VocalScore read_score_text(std::string_view text, bool validate = true) {
  if (text.empty()) throw Error(ErrorCode::kEmptyInput, "no bytes");
  const auto doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::kParse, "invalid JSON");
  return score_from_json(doc, validate);
}

inline VocalScore read_score(std::span<const std::uint8_t> bytes, ScoreFileFormat format,
                             bool validate = true) {
  if (bytes.empty()) throw Error(ErrorCode::kEmptyInput, "no bytes");
  if (format == ScoreFileFormat::kSmf) return read_smf(bytes, validate);
  return read_score_text(
      std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), validate);
}

inline Bytes write_score(const VocalScore& score, ScoreFileFormat format) {
  if (format == ScoreFileFormat::kSmf) return write_smf(score);
  const std::string text = write_score_text(score);
  return Bytes(text.begin(), text.end());
}

/// `.mid`/`.midi` select SMF; anything else is the canonical text format.
inline ScoreFileFormat format_for_path(std::string_view path) {
  auto ends_with = [&](std::string_view suffix) {
    if (path.size() < suffix.size()) return false;
    return std::equal(suffix.rbegin(), suffix.rend(), path.rbegin(), [](char a, char b) {
      return a == std::tolower(static_cast<unsigned char>(b));
    });
  };
  return (ends_with(".mid") || ends_with(".midi")) ? ScoreFileFormat::kSmf
                                                  : ScoreFileFormat::kCanonicalText;
}

// ---------------------------------------------------------------------------
// Lyric sheets
// ---------------------------------------------------------------------------

/// @brief Parses either the JSON sheet form or the tagged plain-text form.
///
/// Plain text: a line `[label]` switches the current tag (initially verse);
/// every other non-blank line becomes one lyric line.
inline LyricsSheet read_lyrics(std::string_view text) {
  LyricsSheet sheet;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) throw Error(ErrorCode::kEmptyInput, "empty lyrics");

  if (text[first] == '{') {
    const auto doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::kParse, "invalid lyrics JSON");
    try {
      for (const auto& line : doc.at("lines")) {
        const auto tag_text = line.at("tag").get<std::string>();
        const auto tag = parse_section_label(tag_text);
        if (!tag) throw Error(ErrorCode::kUnknownSectionLabel, tag_text);
        LyricLine out{*tag, {}};
        if (line.contains("tokens")) {
          out.tokens = line.at("tokens").get<std::vector<std::string>>();
        } else {
          out.tokens = tokenize_line(line.at("text").get<std::string>());
        }
        if (out.tokens.empty()) throw Error(ErrorCode::kParse, "lyric line without tokens");
        sheet.lines.push_back(std::move(out));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, e.what());
    }
  } else {
    SectionLabel tag = SectionLabel::kVerse;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      std::string_view line = text.substr(pos, nl - pos);
      pos = nl + 1;
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
      while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
      if (line.empty()) continue;
      if (line.front() == '[' && line.back() == ']') {
        const auto name = line.substr(1, line.size() - 2);
        const auto parsed = parse_section_label(name);
        if (!parsed) throw Error(ErrorCode::kUnknownSectionLabel, std::string(name));
        tag = *parsed;
        continue;
      }
      auto tokens = tokenize_line(line);
      if (!tokens.empty()) sheet.lines.push_back({tag, std::move(tokens)});
    }
  }
  if (sheet.lines.empty()) throw Error(ErrorCode::kEmptyInput, "lyrics contain no lines");
  return sheet;
}

inline std::string write_lyrics_json(const LyricsSheet& sheet) {
  nlohmann::ordered_json doc;
  auto lines = nlohmann::ordered_json::array();
  for (const auto& line : sheet.lines) {
    lines.push_back({{"tag", to_string(line.tag)}, {"tokens", line.tokens}});
  }
  doc["lines"] = std::move(lines);
  return doc.dump(2) + "\n";
}

}  // namespace songpipe
