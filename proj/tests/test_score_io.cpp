#include <gtest/gtest.h>

#include "generators.hpp"
#include "songpipe/audio.hpp"
#include "songpipe/score_io.hpp"

using namespace songpipe;

namespace {

VocalScore small_score() {
  VocalScore s;
  s.title = "tune";
  s.tempo_map = {{0, 500000}, {960, 400000}};
  s.notes = {{0, 480, 60, "la"}, {480, 240, 62, std::nullopt}, {960, 960, 64, "lo"}};
  s.sections = {{SectionLabel::kVerse, 0, 960, std::string("soft piano")},
                {SectionLabel::kChorus, 960, 1920, std::nullopt}};
  return s;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

Bytes header(std::uint16_t format, std::uint16_t tracks, std::uint16_t division) {
  Bytes b{'M', 'T', 'h', 'd', 0, 0, 0, 6};
  smf::put_u16(b, format);
  smf::put_u16(b, tracks);
  smf::put_u16(b, division);
  return b;
}

void append_track(Bytes& out, const Bytes& body) {
  out.insert(out.end(), {'M', 'T', 'r', 'k'});
  smf::put_u32(out, static_cast<std::uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
}

}  // namespace

TEST(Smf, HeaderIsTypeZeroSingleTrack) {
  const auto bytes = write_smf(small_score());
  ASSERT_GE(bytes.size(), 22u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MThd");
  EXPECT_EQ(bytes[9], 0);   // format
  EXPECT_EQ(bytes[11], 1);  // tracks
  EXPECT_EQ((bytes[12] << 8) | bytes[13], 480);
  EXPECT_EQ(std::string(bytes.begin() + 14, bytes.begin() + 18), "MTrk");
}

TEST(Smf, RoundTripKeepsEverything) {
  const auto s = small_score();
  EXPECT_EQ(read_smf(write_smf(s)), s);
}

TEST(Smf, RandomRoundTrips) {
  gen::Rng rng(2024);
  for (int i = 0; i < 200; ++i) {
    const auto s = gen::random_score(rng, {.min_bars = 1, .max_bars = 20, .tempo_changes = true});
    ASSERT_EQ(read_smf(write_smf(s)), s) << "case " << i;
  }
}

TEST(Smf, RunningStatusAndVelocityZeroNoteOff) {
  // Type 1: a conductor track and a note track using running status.
  auto bytes = header(1, 2, 96);
  append_track(bytes, {0x00, 0xFF, 0x06, 0x05, 'v', 'e', 'r', 's', 'e',
                       0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20,
                       0x81, 0x00, 0xFF, 0x2F, 0x00});
  append_track(bytes, {0x00, 0x90, 60, 100,
                       0x30, 60, 0,     // running status, velocity 0 ends the note
                       0x00, 62, 90,
                       0x30, 0x80, 62, 0,
                       0x00, 0xFF, 0x2F, 0x00});
  const auto s = read_smf(bytes);
  EXPECT_EQ(s.ticks_per_quarter, 96);
  ASSERT_EQ(s.notes.size(), 2u);
  EXPECT_EQ(s.notes[0], (Note{0, 48, 60, std::nullopt}));
  EXPECT_EQ(s.notes[1], (Note{48, 48, 62, std::nullopt}));
  ASSERT_EQ(s.sections.size(), 1u);
  EXPECT_EQ(s.sections[0].end_tick, 128);
  EXPECT_EQ(s.tempo_map.front().micros_per_quarter, 500000);
}

TEST(Smf, Errors) {
  EXPECT_EQ(code_of([] { read_smf(Bytes{}); }), ErrorCode::kEmptyInput);
  EXPECT_EQ(code_of([] { read_smf(Bytes{'R', 'I', 'F', 'F', 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}); }),
            ErrorCode::kMalformedHeader);
  EXPECT_EQ(code_of([] { read_smf(header(2, 1, 480)); }), ErrorCode::kMalformedHeader);

  auto truncated = write_smf(small_score());
  truncated.resize(truncated.size() - 5);
  EXPECT_EQ(code_of([&] { read_smf(truncated); }), ErrorCode::kTruncated);

  auto waltz = header(0, 1, 480);
  append_track(waltz, {0x00, 0xFF, 0x58, 0x04, 3, 2, 24, 8, 0x00, 0xFF, 0x2F, 0x00});
  EXPECT_EQ(code_of([&] { read_smf(waltz); }), ErrorCode::kNonFourFour);

  auto hanging = header(0, 1, 480);
  append_track(hanging, {0x00, 0xFF, 0x06, 0x05, 'v', 'e', 'r', 's', 'e', 0x00, 0x90, 60, 100,
                         0x60, 0xFF, 0x2F, 0x00});
  EXPECT_EQ(code_of([&] { read_smf(hanging); }), ErrorCode::kUnmatchedNoteOn);

  auto hook = header(0, 1, 480);
  append_track(hook, {0x00, 0xFF, 0x06, 0x04, 'h', 'o', 'o', 'k', 0x00, 0xFF, 0x2F, 0x00});
  EXPECT_EQ(code_of([&] { read_smf(hook); }), ErrorCode::kUnknownSectionLabel);

  auto bad = small_score();
  bad.notes[1].onset_tick = 100;
  EXPECT_EQ(code_of([&] { write_smf(bad); }), ErrorCode::kInvalidScore);
}

TEST(Smf, FuzzedBytesOnlyRaiseLibraryErrors) {
  gen::Rng rng(99);
  const auto seed = write_smf(small_score());
  for (int i = 0; i < 2000; ++i) {
    const auto bytes = i % 2 ? gen::mutate(rng, seed) : gen::random_bytes(rng, 64);
    try {
      const auto s = read_smf(bytes);
      EXPECT_TRUE(is_valid(s));
    } catch (const Error&) {
    }
  }
}

TEST(ScoreText, ValidationCanBeDeferred) {
  auto s = small_score();
  s.notes.back().duration_ticks = 0;
  const std::string text = score_to_json(s).dump();
  try {
    read_score_text(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidScore);
  }
  EXPECT_EQ(read_score_text(text, false), s);
}

TEST(ScoreText, RoundTripAndFormatSelection) {
  const auto s = small_score();
  const auto bytes = write_score(s, ScoreFileFormat::kCanonicalText);
  EXPECT_EQ(read_score(bytes, ScoreFileFormat::kCanonicalText), s);
  EXPECT_EQ(format_for_path("a/b.MID"), ScoreFileFormat::kSmf);
  EXPECT_EQ(format_for_path("song.midi"), ScoreFileFormat::kSmf);
  EXPECT_EQ(format_for_path("song.score.json"), ScoreFileFormat::kCanonicalText);
  EXPECT_EQ(code_of([] { read_score_text("{not json"); }), ErrorCode::kParse);
}

TEST(Lyrics, PlainTextTagsAndJson) {
  const auto sheet = read_lyrics("[verse]\nhello there\n\n[chorus]\n我爱你\n");
  ASSERT_EQ(sheet.lines.size(), 2u);
  EXPECT_EQ(sheet.lines[0].tag, SectionLabel::kVerse);
  EXPECT_EQ(sheet.lines[0].tokens.size(), 2u);
  EXPECT_EQ(sheet.lines[1].tag, SectionLabel::kChorus);
  EXPECT_EQ(sheet.lines[1].tokens.size(), 3u);
  EXPECT_EQ(read_lyrics(write_lyrics_json(sheet)), sheet);
  EXPECT_EQ(code_of([] { read_lyrics("[hook]\nla\n"); }), ErrorCode::kUnknownSectionLabel);
  EXPECT_EQ(code_of([] { read_lyrics("  \n"); }), ErrorCode::kEmptyInput);
}

TEST(Wav, Float32RoundTripIsExact) {
  gen::Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto a = gen::random_audio(rng);
    ASSERT_EQ(read_wav(write_wav(a)), a);
  }
}

TEST(Wav, Pcm16RoundTripWithinOneStep) {
  gen::Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const auto a = gen::random_audio(rng);
    const auto b = read_wav(write_wav(a, WavEncoding::kPcm16));
    ASSERT_EQ(b.sample_rate, a.sample_rate);
    ASSERT_EQ(b.channel_count(), a.channel_count());
    ASSERT_EQ(b.frames(), a.frames());
    for (int c = 0; c < a.channel_count(); ++c) {
      for (std::size_t n = 0; n < a.frames(); ++n) {
        ASSERT_NEAR(b.channels[c][n], a.channels[c][n], 1.0 / 32767.0);
      }
    }
  }
}

TEST(Wav, HeaderLayout) {
  AudioBuffer a(44100, 2, 3);
  const auto bytes = write_wav(a, WavEncoding::kPcm16);
  EXPECT_EQ(bytes.size(), 44u + 12u);
  EXPECT_EQ(std::string(bytes.begin() + 8, bytes.begin() + 12), "WAVE");
  EXPECT_EQ(bytes[20], 1);  // PCM
  EXPECT_EQ(bytes[22], 2);  // channels
}

TEST(Wav, FuzzedBytesOnlyRaiseLibraryErrors) {
  gen::Rng rng(5);
  AudioBuffer a(8000, 1, 16);
  const auto seed = write_wav(a);
  for (int i = 0; i < 2000; ++i) {
    const auto bytes = i % 2 ? gen::mutate(rng, seed) : gen::random_bytes(rng, 64);
    try {
      const auto b = read_wav(bytes);
      for (const auto& ch : b.channels) EXPECT_EQ(ch.size(), b.frames());
    } catch (const Error&) {
    }
  }
}
