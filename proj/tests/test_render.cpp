#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "generators.hpp"
#include "songpipe/render.hpp"

using namespace songpipe;

namespace {

ConditionBundle bare_bundle(double duration, const std::vector<double>& beats,
                            const std::vector<double>& downbeats = {}) {
  ConditionBundle b;
  b.duration = duration;
  b.beats = beats;
  b.downbeats = downbeats;
  b.rhythm = rhythm_activation(beats, downbeats, duration, b.frame_rate, b.sigma);
  b.chroma = Matrix<std::uint8_t>(b.rhythm.rows(), 12, 0);
  b.structure.assign(b.rhythm.rows(), 1);
  b.pitch_contour.assign(b.rhythm.rows(), 0.0);
  return b;
}

void fill_chord(ConditionBundle& b, std::size_t first, std::size_t last, std::initializer_list<int> pcs) {
  for (std::size_t f = first; f < last; ++f) {
    for (int pc : pcs) b.chroma(f, static_cast<std::size_t>(pc)) = 1;
  }
}

GenerationWindow span(double start, double end, int order = 0) {
  GenerationWindow w;
  w.start = start;
  w.end = end;
  w.order = order;
  return w;
}

}  // namespace

TEST(SineTable, AccurateAndSymmetric) {
  const auto& t = synth::sine_table();
  for (std::size_t k = 0; k <= synth::kTableSize; k += 7) {
    ASSERT_NEAR(t[k], std::sin(2 * std::numbers::pi * static_cast<double>(k) / synth::kTableSize), 1e-7);
  }
  EXPECT_EQ(t[0], 0.0f);
  EXPECT_EQ(t[1024], 1.0f);
  EXPECT_EQ(t[3072], -1.0f);
  EXPECT_NEAR(synth::sine_at(1u << 30), 1.0f, 1e-7);
  EXPECT_EQ(synth::phase_at(3, 5), 15u);
}

TEST(RenderStub, ClickEnergyPeaksAtItsBeat) {
  const auto b = bare_bundle(2.0, {1.0});
  const auto r = render_stub(b, span(0.0, 2.0));
  ASSERT_EQ(r.audio.frames(), 88200u);
  const auto& x = r.audio.channels[0];
  std::size_t peak = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] * x[i] > x[peak] * x[peak]) peak = i;
  }
  EXPECT_GE(peak, 44100u);
  EXPECT_LE(peak, 44100u + 44u);
  for (std::size_t i = 0; i < 44100; ++i) ASSERT_EQ(x[i], 0.0f);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0], (RenderEvent{1.0, "beat"}));
}

TEST(RenderStub, DownbeatClickIsLouder) {
  const auto b = bare_bundle(3.0, {0.5, 2.0}, {2.0});
  const auto r = render_stub(b, span(0.0, 3.0));
  float beat = 0, down = 0;
  for (std::size_t i = 22050; i < 22050 + 441; ++i) beat = std::max(beat, std::abs(r.audio.channels[0][i]));
  for (std::size_t i = 88200; i < 88200 + 441; ++i) down = std::max(down, std::abs(r.audio.channels[0][i]));
  EXPECT_NEAR(down / beat, 1.5, 1e-3);
  EXPECT_EQ(r.events[1].type, "downbeat");
}

TEST(RenderStub, CMajorPadSpectrumPeaksAtTriad) {
  auto b = bare_bundle(1.0, {});
  fill_chord(b, 0, b.chroma.rows(), {0, 4, 7});
  const auto r = render_stub(b, span(0.0, 1.0));
  constexpr std::size_t kN = 16384;
  const auto& x = r.audio.channels[0];
  std::vector<double> mag(600);
  for (std::size_t k = 1; k < mag.size(); ++k) {
    std::complex<double> acc;
    for (std::size_t n = 0; n < kN; ++n) {
      const double w = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * n / kN);
      acc += w * x[n] * std::polar(1.0, -2 * std::numbers::pi * static_cast<double>(k * n) / kN);
    }
    mag[k] = std::abs(acc);
  }
  std::vector<std::size_t> order(mag.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto c) { return mag[a] > mag[c]; });
  std::vector<double> top_hz;
  for (std::size_t k : order) {
    const double hz = static_cast<double>(k) * 44100.0 / kN;
    bool near_existing = false;
    for (double h : top_hz) near_existing = near_existing || std::abs(h - hz) < 10.0;
    if (!near_existing) top_hz.push_back(hz);
    if (top_hz.size() == 3) break;
  }
  std::sort(top_hz.begin(), top_hz.end());
  EXPECT_NEAR(top_hz[0], 261.63, 2.7);
  EXPECT_NEAR(top_hz[1], 329.63, 2.7);
  EXPECT_NEAR(top_hz[2], 392.00, 2.7);
}

TEST(RenderStub, ChordEventsAtChromaChanges) {
  auto b = bare_bundle(2.0, {});
  fill_chord(b, 0, 50, {0, 4, 7});
  fill_chord(b, 50, 75, {9, 0, 4});
  fill_chord(b, 75, 100, {0, 2});
  const auto r = render_stub(b, span(0.0, 2.0));
  ASSERT_EQ(r.events.size(), 3u);
  EXPECT_EQ(r.events[0], (RenderEvent{0.0, "chord:C:maj"}));
  EXPECT_EQ(r.events[1], (RenderEvent{1.0, "chord:A:min"}));
  EXPECT_EQ(r.events[2], (RenderEvent{1.5, "chord:?"}));
}

TEST(RenderStub, PadGainCrossfadesAtFrameBoundaries) {
  auto b = bare_bundle(1.0, {});
  fill_chord(b, 10, 20, {0});
  EXPECT_EQ(detail::pad_gain(b, 0, 0.31), 1.0);
  EXPECT_EQ(detail::pad_gain(b, 0, 0.5), 0.0);
  EXPECT_NEAR(detail::pad_gain(b, 0, 0.2), 0.5, 1e-9);
  EXPECT_NEAR(detail::pad_gain(b, 0, 0.4 + 0.0025), 0.25, 1e-9);
}

TEST(RenderStub, WindowsTileIntoTheFullRender) {
  gen::Rng rng(81);
  for (int i = 0; i < 10; ++i) {
    const double duration = gen::uniform_real(rng, 2.0, 6.0);
    auto beats = gen::sorted_times(rng, 8, duration);
    auto b = bare_bundle(duration, beats);
    fill_chord(b, 0, b.chroma.rows() / 2, {2, 6, 9});
    fill_chord(b, b.chroma.rows() / 2, b.chroma.rows(), {7, 11, 2});
    // Cut points that fall inside clicks.
    std::vector<GenerationWindow> plan{span(0.0, beats[2] + 0.003, 2), span(beats[2] + 0.003, beats[5] + 0.001, 0),
                                       span(beats[5] + 0.001, duration, 1)};
    StubGenerator gen(22050);
    const auto tiled = render_plan(gen, b, plan);
    const auto whole = render_stub(b, span(0.0, duration), 22050);
    ASSERT_EQ(tiled.audio, whole.audio);
    ASSERT_EQ(tiled.events, whole.events);
  }
}

TEST(RenderStub, RejectsWindowsOutsideBundle) {
  const auto b = bare_bundle(1.0, {});
  EXPECT_THROW(render_stub(b, span(0.5, 1.5)), Error);
  EXPECT_THROW(render_stub(b, span(0.5, 0.5)), Error);
}

namespace {

/// Records which reference it receives for each window.
struct RecordingGenerator {
  std::vector<std::pair<int, std::size_t>> seen;
  int sample_rate() const { return 8000; }
  RenderResult generate(const ConditionBundle& b, const AudioBuffer* ref, const GenerationWindow& w) {
    seen.emplace_back(w.order, ref ? ref->frames() : 0);
    return render_stub(b, w, 8000);
  }
};

}  // namespace

TEST(RenderPlan, PassesReferenceAudioInOrder) {
  const auto b = bare_bundle(3.0, {});
  auto w0 = span(1.0, 3.0, 0);
  auto w1 = span(0.0, 1.0, 1);
  w1.reference = ReferenceKind::kBackwardFrom;
  w1.reference_window = 0;
  RecordingGenerator g;
  render_plan(g, b, {w1, w0});
  ASSERT_EQ(g.seen.size(), 2u);
  EXPECT_EQ(g.seen[0], (std::pair<int, std::size_t>{0, 0}));
  EXPECT_EQ(g.seen[1], (std::pair<int, std::size_t>{1, 16000}));
  auto bad = w0;
  bad.reference_window = 5;
  EXPECT_THROW(render_plan(g, b, {bad}), Error);
}

TEST(EventLog, RoundTrip) {
  const std::vector<RenderEvent> ev{{0.0, "chord:C:maj"}, {0.5, "beat"}, {2.0, "downbeat"}};
  EXPECT_EQ(write_event_log(ev), "0.0\tchord:C:maj\n0.5\tbeat\n2.0\tdownbeat\n");
  EXPECT_EQ(read_event_log(write_event_log(ev)), ev);
  EXPECT_EQ(event_beat_times(ev), (std::vector<double>{0.5, 2.0}));
  EXPECT_THROW(read_event_log("0.5\n"), Error);
}

TEST(GuideVocal, LengthAndLevel) {
  VocalScore s;
  s.notes = {{0, 480, 69, "a"}, {960, 480, 57, "b"}};
  s.sections = {{SectionLabel::kVerse, 0, 1920, std::nullopt}};
  const auto a = render_guide_vocal(s, 8000);
  EXPECT_EQ(a.frames(), 16000u);
  EXPECT_LE(a.peak(), 0.2501f);
  EXPECT_GT(a.peak(), 0.24f);
  EXPECT_EQ(a.channels[0][0], 0.0f);
  for (std::size_t i = 4000; i < 8000; ++i) ASSERT_EQ(a.channels[0][i], 0.0f);
}

TEST(Mix, NormalisesToTargetPeak) {
  AudioBuffer v(8000, 1, 100), acc(8000, 2, 60);
  v.channels[0][10] = 0.5f;
  acc.channels[0][10] = 0.5f;
  acc.channels[1][20] = -0.25f;
  const auto m = mix(v, acc);
  EXPECT_EQ(m.channel_count(), 2);
  EXPECT_EQ(m.frames(), 100u);
  EXPECT_FLOAT_EQ(m.peak(), 0.95f);
  EXPECT_FLOAT_EQ(m.channels[1][10], 0.475f);
  EXPECT_FLOAT_EQ(m.channels[1][20], -0.2375f);
  const auto silent = mix(AudioBuffer(8000, 1, 10), AudioBuffer(8000, 1, 10));
  EXPECT_EQ(silent.peak(), 0.0f);
  EXPECT_THROW(mix(AudioBuffer(8000, 1, 10), AudioBuffer(44100, 1, 10)), Error);
}
