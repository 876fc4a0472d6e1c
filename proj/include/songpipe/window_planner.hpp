/**
 * @file window_planner.hpp
 * @brief Generation-window planning for long-form accompaniment:
 *        section-anchored windows, downbeat splitting of long sections,
 *        verse-first ordering with backward reference for the intro, and
 *        seeded training-slice reference swapping.
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "songpipe/chords.hpp"
#include "songpipe/conditioning.hpp"
#include "songpipe/error.hpp"
#include "songpipe/score.hpp"

namespace songpipe {

constexpr double kMaxWindowSeconds = 47.0;
constexpr double kBackwardSwapProbability = 0.5;

enum class ReferenceKind { kNone, kPreviousWindow, kBackwardFrom };

inline std::string_view to_string(ReferenceKind kind) {
  switch (kind) {
    case ReferenceKind::kNone: return "none";
    case ReferenceKind::kPreviousWindow: return "previous_window";
    case ReferenceKind::kBackwardFrom: return "backward_from";
  }
  return "none";
}

inline std::optional<ReferenceKind> parse_reference_kind(std::string_view text) {
  if (text == "none") return ReferenceKind::kNone;
  if (text == "previous_window") return ReferenceKind::kPreviousWindow;
  if (text == "backward_from") return ReferenceKind::kBackwardFrom;
  return std::nullopt;
}

struct GenerationWindow {
  double start = 0.0;
  double end = 0.0;
  int anchor_section = 0;
  ReferenceKind reference = ReferenceKind::kNone;
  /// Section the backward reference comes from; -1 otherwise.
  int reference_section = -1;
  /// `order` of the window whose audio is the reference; -1 for none.
  int reference_window = -1;
  int order = 0;

  double length() const { return end - start; }
  bool operator==(const GenerationWindow&) const = default;
};

struct TrainingSlice {
  GenerationWindow window;
  bool reference_swapped = false;
  bool operator==(const TrainingSlice&) const = default;
};

/// @brief Cuts [start, end) into pieces no longer than `max_window`, each
/// cut at the latest downbeat that fits.
inline std::vector<std::pair<double, double>> split_at_downbeats(double start, double end,
                                                                 std::span<const double> downbeats,
                                                                 double max_window) {
  constexpr double kEps = 1e-9;
  std::vector<std::pair<double, double>> out;
  double w = start;
  while (end - w > max_window + kEps) {
    double cut = -1.0;
    for (double d : downbeats) {
      if (d > w + kEps && d <= w + max_window + kEps && d < end - kEps) cut = d;
    }
    if (cut < 0.0) {
      throw Error(ErrorCode::kPlanning, "no downbeat to split the span starting at " +
                                            format_seconds(w) + " s");
    }
    out.emplace_back(w, cut);
    w = cut;
  }
  out.emplace_back(w, end);
  return out;
}

/// @brief Inference-time window plan, sorted by generation order.
///
/// The first verse comes first with no reference. Sections before it follow
/// in time order; the earliest references the verse backwards and the rest
/// chain on their predecessor. Everything after the first verse is generated
/// chronologically, each window referencing the window just before it.
inline std::vector<GenerationWindow> plan_inference(const VocalScore& score,
                                                    double max_window = kMaxWindowSeconds) {
  require_valid(score);
  if (!(max_window > 0.0)) throw Error(ErrorCode::kInvalidArgument, "max_window must be > 0");
  const auto spans = section_spans(score);
  int verse = -1;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].label == SectionLabel::kVerse) {
      verse = static_cast<int>(i);
      break;
    }
  }
  if (verse < 0) throw Error(ErrorCode::kPlanning, "score has no verse section");
  const auto downbeats = beat_downbeat_events(score).downbeats;

  std::vector<GenerationWindow> timeline;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    for (const auto& [s, e] : split_at_downbeats(spans[i].start, spans[i].end, downbeats, max_window)) {
      GenerationWindow w;
      w.start = s;
      w.end = e;
      w.anchor_section = static_cast<int>(i);
      timeline.push_back(w);
    }
  }

  // Generation rank per chronological position.
  std::vector<int> rank(timeline.size(), -1);
  int next = 0;
  for (std::size_t t = 0; t < timeline.size(); ++t) {
    if (timeline[t].anchor_section == verse) rank[t] = next++;
  }
  for (std::size_t t = 0; t < timeline.size(); ++t) {
    if (timeline[t].anchor_section < verse) rank[t] = next++;
  }
  for (std::size_t t = 0; t < timeline.size(); ++t) {
    if (timeline[t].anchor_section > verse) rank[t] = next++;
  }

  std::size_t first_verse_pos = 0;
  while (timeline[first_verse_pos].anchor_section != verse) ++first_verse_pos;

  for (std::size_t t = 0; t < timeline.size(); ++t) {
    auto& w = timeline[t];
    w.order = rank[t];
    if (t == first_verse_pos) {
      w.reference = ReferenceKind::kNone;
    } else if (t == 0 && w.anchor_section < verse) {
      w.reference = ReferenceKind::kBackwardFrom;
      w.reference_section = verse;
      w.reference_window = rank[first_verse_pos];
    } else {
      w.reference = ReferenceKind::kPreviousWindow;
      w.reference_window = rank[t - 1];
    }
  }
  std::sort(timeline.begin(), timeline.end(),
            [](const GenerationWindow& a, const GenerationWindow& b) { return a.order < b.order; });
  return timeline;
}

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw; the
/// mapping is fixed so results match across standard libraries.
inline double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// @brief One section-anchored training window per section. Windows that
/// begin with an intro swap their reference to the next verse with
/// probability `p_backward`, drawn from a generator seeded with `seed`.
inline std::vector<TrainingSlice> plan_training_slices(const VocalScore& score,
                                                       double p_backward = kBackwardSwapProbability,
                                                       std::uint64_t seed = 0,
                                                       double max_window = kMaxWindowSeconds) {
  require_valid(score);
  if (!(p_backward >= 0.0 && p_backward <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "p_backward must lie in [0, 1]");
  }
  const auto spans = section_spans(score);
  const double song_end = duration_seconds(score);
  std::mt19937_64 rng(seed);
  std::vector<TrainingSlice> out;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    TrainingSlice slice;
    auto& w = slice.window;
    w.start = spans[i].start;
    w.end = std::min(spans[i].start + max_window, song_end);
    w.anchor_section = static_cast<int>(i);
    w.order = static_cast<int>(i);
    if (i > 0) {
      w.reference = ReferenceKind::kPreviousWindow;
      w.reference_window = static_cast<int>(i) - 1;
    }
    if (spans[i].label == SectionLabel::kIntro) {
      int verse = -1;
      for (std::size_t j = i + 1; j < spans.size(); ++j) {
        if (spans[j].label == SectionLabel::kVerse) {
          verse = static_cast<int>(j);
          break;
        }
      }
      if (verse >= 0 && unit_draw(rng) < p_backward) {
        slice.reference_swapped = true;
        w.reference = ReferenceKind::kBackwardFrom;
        w.reference_section = verse;
        w.reference_window = verse;
      }
    }
    out.push_back(slice);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

constexpr std::string_view kPlanFormatTag = "songpipe.plan";

inline nlohmann::ordered_json window_to_json(const GenerationWindow& w) {
  return {{"order", w.order},
          {"start", w.start},
          {"end", w.end},
          {"anchor_section", w.anchor_section},
          {"reference", to_string(w.reference)},
          {"reference_section", w.reference_section},
          {"reference_window", w.reference_window}};
}

inline GenerationWindow window_from_json(const nlohmann::json& j) {
  GenerationWindow w;
  w.order = j.at("order").get<int>();
  w.start = j.at("start").get<double>();
  w.end = j.at("end").get<double>();
  w.anchor_section = j.at("anchor_section").get<int>();
  const auto kind = parse_reference_kind(j.at("reference").get<std::string>());
  if (!kind) throw Error(ErrorCode::kParse, "bad reference kind");
  w.reference = *kind;
  w.reference_section = j.at("reference_section").get<int>();
  w.reference_window = j.at("reference_window").get<int>();
  return w;
}

inline std::string write_plan_json(const std::vector<GenerationWindow>& plan) {
  nlohmann::ordered_json doc;
  doc["format"] = kPlanFormatTag;
  doc["version"] = 1;
  auto windows = nlohmann::ordered_json::array();
  for (const auto& w : plan) windows.push_back(window_to_json(w));
  doc["windows"] = std::move(windows);
  return doc.dump(2) + "\n";
}

inline std::vector<GenerationWindow> read_plan_json(std::string_view text) {
  const auto doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::kParse, "invalid plan JSON");
  try {
    if (doc.at("format").get<std::string>() != kPlanFormatTag) {
      throw Error(ErrorCode::kParse, "not a songpipe plan document");
    }
    std::vector<GenerationWindow> plan;
    for (const auto& j : doc.at("windows")) plan.push_back(window_from_json(j));
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

inline std::string write_training_slices_json(const std::vector<TrainingSlice>& slices) {
  nlohmann::ordered_json doc;
  doc["format"] = "songpipe.training_slices";
  doc["version"] = 1;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : slices) {
    auto j = window_to_json(s.window);
    j["reference_swapped"] = s.reference_swapped;
    arr.push_back(std::move(j));
  }
  doc["slices"] = std::move(arr);
  return doc.dump(2) + "\n";
}

/// Fixed-width table, one window per line, in generation order.
inline std::string format_plan_table(const std::vector<GenerationWindow>& plan,
                                     const VocalScore* score = nullptr) {
  char line[160];
  std::string out = "order  start(s)    end(s)  len(s)  section        reference\n";
  for (const auto& w : plan) {
    std::string section = std::to_string(w.anchor_section);
    if (score != nullptr && w.anchor_section >= 0 &&
        static_cast<std::size_t>(w.anchor_section) < score->sections.size()) {
      section += ":" + std::string(to_string(score->sections[static_cast<std::size_t>(w.anchor_section)].label));
    }
    std::string ref(to_string(w.reference));
    if (w.reference == ReferenceKind::kBackwardFrom) {
      ref += "(" + std::to_string(w.reference_section) + ")";
    }
    if (w.reference_window >= 0) ref += " <- #" + std::to_string(w.reference_window);
    std::snprintf(line, sizeof(line), "%5d %9.3f %9.3f %7.3f  %-13s  %s\n", w.order, w.start, w.end,
                  w.length(), section.c_str(), ref.c_str());
    out += line;
  }
  return out;
}

}  // namespace songpipe
