/**
 * @file metrics.hpp
 * @brief Objective evaluation: Rhythm F1, Key Accuracy, Chord F1, phoneme
 *        error rate with line deduplication, Krumhansl-Schmuckler key
 *        estimation, and a pitch-class chromagram measured from audio.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "songpipe/audio.hpp"
#include "songpipe/chords.hpp"
#include "songpipe/conditioning.hpp"
#include "songpipe/error.hpp"
#include "songpipe/matrix.hpp"

namespace songpipe {

constexpr double kRhythmTolerance = 0.07;
/// Added to the tolerance so an offset of exactly 70 ms survives rounding.
constexpr double kToleranceSlack = 1e-9;

struct MatchReport {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Scores from raw counts. With nothing on either side everything is 1.
inline MatchReport make_report(std::size_t tp, std::size_t fp, std::size_t fn) {
  MatchReport r{tp, fp, fn, 0.0, 0.0, 0.0};
  if (tp + fp + fn == 0) {
    r.precision = r.recall = r.f1 = 1.0;
    return r;
  }
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

/// @brief One-to-one beat matching within `tolerance` (inclusive).
///
/// Greedy two-pointer matching over sorted lists; for interval matching on
/// a line this attains the maximum number of matched pairs.
inline MatchReport rhythm_f1(std::span<const double> reference, std::span<const double> estimated,
                             double tolerance = kRhythmTolerance) {
  std::vector<double> ref(reference.begin(), reference.end());
  std::vector<double> est(estimated.begin(), estimated.end());
  std::sort(ref.begin(), ref.end());
  std::sort(est.begin(), est.end());
  const double tol = tolerance + kToleranceSlack;
  std::size_t i = 0, j = 0, tp = 0;
  while (i < ref.size() && j < est.size()) {
    if (std::abs(ref[i] - est[j]) <= tol) {
      ++tp;
      ++i;
      ++j;
    } else if (est[j] < ref[i]) {
      ++j;
    } else {
      ++i;
    }
  }
  return make_report(tp, est.size() - tp, ref.size() - tp);
}

/// Fraction of positions where tonic and mode both agree.
inline double key_accuracy(std::span<const KeyLabel> reference, std::span<const KeyLabel> estimated) {
  if (reference.size() != estimated.size()) {
    throw Error(ErrorCode::kShapeMismatch, "key lists differ in length: " +
                                               std::to_string(reference.size()) + " vs " +
                                               std::to_string(estimated.size()));
  }
  if (reference.empty()) throw Error(ErrorCode::kEmptyInput, "no keys to compare");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) hits += reference[i] == estimated[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(reference.size());
}

/// Micro-averaged counts over every (frame, pitch class) cell.
inline MatchReport chord_match(const Matrix<std::uint8_t>& reference,
                               const Matrix<std::uint8_t>& estimated) {
  require_same_shape(reference, estimated, "chromagrams");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t r = 0; r < reference.rows(); ++r) {
    for (std::size_t c = 0; c < reference.cols(); ++c) {
      const bool a = reference(r, c) != 0;
      const bool b = estimated(r, c) != 0;
      tp += a && b;
      fp += !a && b;
      fn += a && !b;
    }
  }
  return make_report(tp, fp, fn);
}

inline double chord_f1(const Matrix<std::uint8_t>& reference, const Matrix<std::uint8_t>& estimated) {
  return chord_match(reference, estimated).f1;
}

/// Unit-cost Levenshtein distance.
template <typename T>
std::size_t edit_distance(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// @brief Phoneme error rate (S + D + I) / N.
template <typename T>
double per(std::span<const T> reference, std::span<const T> hypothesis) {
  if (reference.empty()) throw Error(ErrorCode::kEmptyInput, "reference phoneme list is empty");
  return static_cast<double>(edit_distance(reference, hypothesis)) /
         static_cast<double>(reference.size());
}

template <typename T>
double per(const std::vector<T>& reference, const std::vector<T>& hypothesis) {
  return per(std::span<const T>(reference), std::span<const T>(hypothesis));
}

/// Collapses runs of identical consecutive lines.
inline std::vector<std::string> dedup_lines(const std::vector<std::string>& lines) {
  std::vector<std::string> out;
  for (const auto& l : lines) {
    if (out.empty() || out.back() != l) out.push_back(l);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Key estimation
// ---------------------------------------------------------------------------

constexpr std::array<double, 12> kKrumhanslMajor = {6.35, 2.23, 3.48, 2.33, 4.38, 4.09,
                                                    2.52, 5.19, 2.39, 3.66, 2.29, 2.88};
constexpr std::array<double, 12> kKrumhanslMinor = {6.33, 2.68, 3.52, 5.38, 2.60, 3.53,
                                                    2.54, 4.75, 3.98, 2.69, 3.34, 3.17};

inline double pearson(const std::array<double, 12>& x, const std::array<double, 12>& y) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < 12; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= 12.0;
  my /= 12.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < 12; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

/// Correlation of a pitch-class profile with each of the 24 key templates,
/// indexed by key_index.
inline std::array<double, 24> key_correlations(const std::array<double, 12>& profile) {
  std::array<double, 24> out{};
  for (int tonic = 0; tonic < 12; ++tonic) {
    for (int mode = 0; mode < 2; ++mode) {
      const auto& base = mode == 0 ? kKrumhanslMajor : kKrumhanslMinor;
      std::array<double, 12> rotated{};
      for (int pc = 0; pc < 12; ++pc) {
        rotated[static_cast<std::size_t>(pc)] = base[static_cast<std::size_t>((pc - tonic + 12) % 12)];
      }
      out[static_cast<std::size_t>(tonic * 2 + mode)] = pearson(profile, rotated);
    }
  }
  return out;
}

/// @brief Key whose template best correlates with the time-summed chroma;
/// ties go to the lower key index.
template <typename T>
KeyLabel estimate_key(const Matrix<T>& chroma) {
  if (chroma.cols() != 12) throw Error(ErrorCode::kShapeMismatch, "chroma must have 12 columns");
  if (chroma.rows() == 0) throw Error(ErrorCode::kEmptyInput, "chroma has no frames");
  std::array<double, 12> profile{};
  double total = 0.0;
  for (std::size_t r = 0; r < chroma.rows(); ++r) {
    for (std::size_t c = 0; c < 12; ++c) {
      profile[c] += static_cast<double>(chroma(r, c));
      total += std::abs(static_cast<double>(chroma(r, c)));
    }
  }
  if (total <= 0.0) throw Error(ErrorCode::kEmptyInput, "chroma is all zero");
  const auto corr = key_correlations(profile);
  std::size_t best = 0;
  for (std::size_t k = 1; k < corr.size(); ++k) {
    if (corr[k] > corr[best]) best = k;
  }
  return KeyLabel{static_cast<int>(best / 2), static_cast<Mode>(best % 2)};
}

/// Rows [first, last) of a chromagram.
template <typename T>
Matrix<T> slice_rows(const Matrix<T>& m, std::size_t first, std::size_t last) {
  last = std::min(last, m.rows());
  first = std::min(first, last);
  Matrix<T> out(last - first, m.cols(), T{});
  for (std::size_t r = first; r < last; ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(r - first, c) = m(r, c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chroma from audio
// ---------------------------------------------------------------------------

struct AudioChromaOptions {
  /// Lowest and highest analysed MIDI pitch (C3..G5). The top stays below
  /// the 1 kHz click band.
  int low_pitch = 48;
  int high_pitch = 79;
  /// Semitone-resolution Q at the lowest pitch: one semitone is one bin.
  /// Every pitch shares that window so all pitch classes smear equally
  /// across a chord change.
  double q = 1.0 / (std::exp2(1.0 / 12.0) - 1.0);
  /// A pitch class is active at or above this fraction of the frame maximum.
  double relative_threshold = 0.1;
  /// Absolute energy floor (squared amplitude scale) so silence stays empty.
  double energy_floor = 1e-5;
  /// At most this many pitch classes per frame, strongest first.
  std::size_t max_active = 3;
};

/// @brief Binary pitch-class chromagram of audio on the bundle frame grid.
///
/// Each pitch gets a Hann-windowed single-bin DFT, Q periods of the lowest
/// pitch long, centered mid-frame and normalized so a steady sinusoid
/// of amplitude A reads A/2. Energies are summed per pitch class.
inline Matrix<std::uint8_t> chroma_from_audio(const AudioBuffer& audio, double frame_rate,
                                              std::size_t frames,
                                              const AudioChromaOptions& options = {}) {
  if (!(frame_rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "frame_rate must be > 0");
  if (audio.sample_rate <= 0) throw Error(ErrorCode::kInvalidArgument, "sample rate must be > 0");
  const auto x = mono_mix(audio);
  const double sr = audio.sample_rate;

  struct Kernel {
    std::size_t pc;
    std::vector<std::complex<double>> taps;
  };
  std::vector<Kernel> kernels;
  const double low_hz = 440.0 * std::exp2((options.low_pitch - 69) / 12.0);
  const auto n = static_cast<std::size_t>(std::lround(options.q * sr / low_hz));
  for (int p = options.low_pitch; p <= options.high_pitch; ++p) {
    const double hz = 440.0 * std::exp2((p - 69) / 12.0);
    Kernel k{static_cast<std::size_t>(pitch_class(p)), std::vector<std::complex<double>>(n)};
    double wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (i + 0.5) / n);
      wsum += w;
      k.taps[i] = std::polar(w, -2.0 * std::numbers::pi * hz * static_cast<double>(i) / sr);
    }
    for (auto& t : k.taps) t /= wsum;
    kernels.push_back(std::move(k));
  }

  Matrix<std::uint8_t> chroma(frames, 12, 0);
  const auto len = static_cast<std::ptrdiff_t>(x.size());
  for (std::size_t f = 0; f < frames; ++f) {
    const auto center = static_cast<std::ptrdiff_t>(std::llround((static_cast<double>(f) + 0.5) / frame_rate * sr));
    std::array<double, 12> energy{};
    for (const auto& k : kernels) {
      const auto n = static_cast<std::ptrdiff_t>(k.taps.size());
      const std::ptrdiff_t start = center - n / 2;
      std::complex<double> acc{};
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -start);
      const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n, len - start);
      for (std::ptrdiff_t i = lo; i < hi; ++i) {
        acc += k.taps[static_cast<std::size_t>(i)] * static_cast<double>(x[static_cast<std::size_t>(start + i)]);
      }
      energy[k.pc] += std::norm(acc);
    }
    const double top = *std::max_element(energy.begin(), energy.end());
    std::array<std::size_t, 12> order{};
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return energy[a] > energy[b]; });
    for (std::size_t k = 0; k < std::min<std::size_t>(options.max_active, 12); ++k) {
      const std::size_t pc = order[k];
      if (energy[pc] >= options.energy_floor && energy[pc] >= options.relative_threshold * top) {
        chroma(f, pc) = 1;
      }
    }
  }
  return chroma;
}

}  // namespace songpipe
