#include <gtest/gtest.h>

#include <cmath>

#include "generators.hpp"
#include "songpipe/conditioning.hpp"
#include "songpipe/score_io.hpp"

using namespace songpipe;

namespace {

VocalScore eight_beat_score() {
  VocalScore s;  // 120 BPM, two bars
  s.notes = {{0, 960, 60, "a"}, {960, 960, 67, "b"}, {2880, 960, 64, "c"}};
  s.sections = {{SectionLabel::kVerse, 0, 1920, std::nullopt},
                {SectionLabel::kChorus, 1920, 3840, std::string("bright")}};
  return s;
}

}  // namespace

TEST(FrameGrid, CountAndTimes) {
  EXPECT_EQ(frame_count(1.0, 50.0), 50u);
  EXPECT_EQ(frame_count(1.001, 50.0), 51u);
  EXPECT_EQ(frame_count(0.0, 50.0), 0u);
  EXPECT_DOUBLE_EQ(frame_time(25, 50.0), 0.5);
  EXPECT_THROW(frame_count(1.0, 0.0), Error);
}

TEST(BeatEvents, QuarterGridWithDownbeatsEveryFour) {
  const auto ev = beat_downbeat_events(eight_beat_score());
  ASSERT_EQ(ev.beats.size(), 8u);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_DOUBLE_EQ(ev.beats[k], 0.5 * static_cast<double>(k));
  EXPECT_EQ(ev.downbeats, (std::vector<double>{0.0, 2.0}));
}

TEST(RhythmActivation, GaussianShapeAroundEvent) {
  const std::vector<double> beats{1.0};
  const auto r = rhythm_activation(beats, {}, 2.0, 100.0, 0.05);
  ASSERT_EQ(r.rows(), 200u);
  EXPECT_DOUBLE_EQ(r(100, 0), 1.0);
  EXPECT_NEAR(r(95, 0), std::exp(-0.5), 1e-12);
  EXPECT_NEAR(r(105, 0), std::exp(-0.5), 1e-12);
  EXPECT_NEAR(r(90, 0), std::exp(-2.0), 1e-12);
  EXPECT_DOUBLE_EQ(r(100, 1), 0.0);
}

TEST(RhythmActivation, MatchesDirectEvaluationOnRandomGrids) {
  gen::Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const double fr = gen::uniform_int(rng, 20, 120);
    const double sigma = gen::uniform_real(rng, 0.02, 0.1);
    const double duration = gen::uniform_real(rng, 1.0, 6.0);
    auto beats = gen::sorted_times(rng, gen::uniform_int(rng, 1, 12), duration);
    const auto r = rhythm_activation(beats, {}, duration, fr, sigma);
    for (std::size_t i = 0; i < r.rows(); ++i) {
      double expect = 0.0;
      for (double b : beats) {
        const double centre = std::min<double>(std::llround(b * fr), static_cast<double>(r.rows() - 1)) / fr;
        const double d = static_cast<double>(i) / fr - centre;
        expect = std::max(expect, std::abs(d) < 1e-12 ? 1.0 : std::exp(-d * d / (2 * sigma * sigma)));
      }
      if (expect < 1e-13) expect = r(i, 0);  // outside the evaluated support
      ASSERT_NEAR(r(i, 0), expect, 1e-12);
      ASSERT_GE(r(i, 0), 0.0);
      ASSERT_LE(r(i, 0), 1.0);
    }
  }
}

TEST(RhythmActivation, RejectsEventsOutsideDuration) {
  const std::vector<double> late{3.0};
  EXPECT_THROW(rhythm_activation(late, {}, 2.0, 50.0, 0.05), Error);
  EXPECT_THROW(rhythm_activation({}, {}, 2.0, 50.0, 0.0), Error);
}

TEST(ChordChromagram, TriadsOnCoveredFrames) {
  ChordSequence chords;
  chords.entries = {{0.0, 1.0, {0, Quality::kMajor}}, {1.0, 2.0, {9, Quality::kMinor}}};
  const auto c = chord_chromagram(chords, 3.0, 50.0);
  ASSERT_EQ(c.rows(), 150u);
  auto row = [&](std::size_t i) {
    std::string s;
    for (std::size_t k = 0; k < 12; ++k) s += c(i, k) ? '1' : '0';
    return s;
  };
  EXPECT_EQ(row(0), "100010010000");
  EXPECT_EQ(row(49), "100010010000");
  EXPECT_EQ(row(50), "100010000100");
  EXPECT_EQ(row(120), "000000000000");
}

TEST(ChordChromagram, RejectsOverlapAndOverrun) {
  ChordSequence overlap;
  overlap.entries = {{0.0, 1.5, {0, Quality::kMajor}}, {1.0, 2.0, {7, Quality::kMajor}}};
  EXPECT_THROW(chord_chromagram(overlap, 3.0, 50.0), Error);
  ChordSequence overrun;
  overrun.entries = {{0.0, 4.0, {0, Quality::kMajor}}};
  EXPECT_THROW(chord_chromagram(overrun, 3.0, 50.0), Error);
}

TEST(SnapBoundaries, NearestTargetEarlierOnTies) {
  const std::vector<double> downbeats{0.0, 2.0, 4.0};
  const std::vector<double> edges{0.0, 4.0};
  const std::vector<double> b{1.9};
  EXPECT_EQ(snap_boundaries(b, downbeats, edges), (std::vector<double>{2.0}));
  const std::vector<double> tie{1.0, 3.0, 5.5, 2.1};
  EXPECT_EQ(snap_boundaries(tie, downbeats, edges), (std::vector<double>{0.0, 2.0, 4.0}));
}

TEST(PitchContour, FollowsNotesAndRests) {
  const auto contour = pitch_contour_from_score(eight_beat_score(), 50.0);
  ASSERT_EQ(contour.size(), 200u);
  EXPECT_EQ(contour[0], 60.0);
  EXPECT_EQ(contour[49], 60.0);
  EXPECT_EQ(contour[50], 67.0);
  EXPECT_EQ(contour[100], 0.0);
  EXPECT_EQ(contour[199], 64.0);
}

TEST(Bundle, AssemblesSignalsOnOneGrid) {
  ChordSequence chords;
  chords.entries = {{0.1, 1.9, {0, Quality::kMajor}}, {2.0, 4.0, {7, Quality::kMajor}}};
  const std::vector<KeyLabel> keys{{0, Mode::kMajor}, {7, Mode::kMajor}};
  const auto b = build_condition_bundle(eight_beat_score(), chords, keys);
  EXPECT_DOUBLE_EQ(b.duration, 4.0);
  EXPECT_EQ(b.frames(), 200u);
  EXPECT_EQ(b.chroma.rows(), 200u);
  EXPECT_EQ(b.structure.size(), 200u);
  EXPECT_EQ(b.structure[0], static_cast<int>(SectionLabel::kVerse));
  EXPECT_EQ(b.structure[100], static_cast<int>(SectionLabel::kChorus));
  // Chord edges snapped to 0 and 2.
  EXPECT_EQ(b.chroma(0, 0), 1);
  EXPECT_EQ(b.chroma(99, 4), 1);
  EXPECT_EQ(b.chroma(100, 2), 1);
  EXPECT_EQ(b.sections[1].prompt, std::optional<std::string>("bright"));
  EXPECT_EQ(section_keys(b), keys);
  EXPECT_EQ(read_bundle_json(write_bundle_json(b)), b);
}

TEST(Bundle, KeyCountAndContourLengthChecked) {
  ChordSequence chords;
  EXPECT_THROW(build_condition_bundle(eight_beat_score(), chords, {}), Error);
  const std::vector<KeyLabel> keys(2);
  const std::vector<double> wrong(10, 60.0);
  EXPECT_THROW(build_condition_bundle(eight_beat_score(), chords, keys, 50.0, 0.05, wrong), Error);
}

TEST(Bundle, RandomScoresProduceConsistentShapes) {
  gen::Rng rng(8);
  for (int i = 0; i < 40; ++i) {
    const auto s = gen::random_score(rng, {.tempo_changes = true});
    ChordSequence chords;
    const double d = duration_seconds(s);
    chords.entries = {{0.0, d / 2, {0, Quality::kMajor}}, {d / 2, d, {5, Quality::kMajor}}};
    const std::vector<KeyLabel> keys(s.sections.size());
    const auto b = build_condition_bundle(s, chords, keys, 50.0, 0.05);
    ASSERT_EQ(b.frames(), frame_count(d, 50.0));
    ASSERT_EQ(b.pitch_contour.size(), b.frames());
    for (double beat : b.beats) {
      const auto f = std::min<std::size_t>(std::llround(beat * 50.0), b.frames() - 1);
      ASSERT_DOUBLE_EQ(b.rhythm(f, 0), 1.0);
    }
    for (int v : b.structure) ASSERT_GE(v, 0);
    ASSERT_EQ(read_bundle_json(write_bundle_json(b)), b);
  }
}

TEST(ChordsText, RoundTripAndErrors) {
  ChordSequence chords;
  chords.entries = {{0.0, 1.5, {0, Quality::kMajor}}, {1.5, 3.0, {9, Quality::kMinor}}};
  EXPECT_EQ(write_chords(chords), "0.0 1.5 C:maj\n1.5 3.0 A:min\n");
  EXPECT_EQ(read_chords(write_chords(chords)), chords);
  EXPECT_THROW(read_chords("0 1 H:maj\n"), Error);
  EXPECT_THROW(read_chords("0 1\n"), Error);
  const std::vector<KeyLabel> keys{{2, Mode::kMinor}, {10, Mode::kMajor}};
  EXPECT_EQ(read_keys(write_keys(keys)), keys);
}
