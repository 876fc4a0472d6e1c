#include <gtest/gtest.h>

#include <set>

#include "generators.hpp"
#include "oracles.hpp"
#include "songpipe/symbolic_prep.hpp"

using namespace songpipe;

namespace {

LyricsSheet sheet(const std::vector<std::pair<SectionLabel, int>>& lines) {
  LyricsSheet s;
  for (const auto& [tag, n] : lines) s.lines.push_back({tag, std::vector<std::string>(static_cast<std::size_t>(n), "x")});
  return s;
}

LyricsSheet random_sheet(gen::Rng& rng) {
  std::vector<std::pair<SectionLabel, int>> lines(static_cast<std::size_t>(gen::uniform_int(rng, 1, 12)));
  for (auto& l : lines) l = {static_cast<SectionLabel>(gen::uniform_int(rng, 0, 3)), gen::uniform_int(rng, 1, 10)};
  return sheet(lines);
}

VocalScore pitches(const std::vector<int>& ps) {
  VocalScore s;
  Tick t = 0;
  for (int p : ps) {
    s.notes.push_back({t, 480, p, std::nullopt});
    t += 480;
  }
  s.sections = {{SectionLabel::kVerse, 0, std::max<Tick>(t, 1), std::nullopt}};
  return s;
}

constexpr auto V = SectionLabel::kVerse;
constexpr auto C = SectionLabel::kChorus;

}  // namespace

TEST(Penalty, WorkedComponents) {
  const auto target = sheet({{V, 4}, {V, 6}, {C, 5}, {C, 5}});
  const auto cand = sheet({{V, 4}, {C, 8}});
  const auto p = penalty_score(target, cand);
  EXPECT_DOUBLE_EQ(p.p_sent, 0.5);
  // Candidate padded with its median 6: |4-4|+|6-8|+|5-6|+|5-6| = 4 over 4 lines, max 8.
  EXPECT_DOUBLE_EQ(p.p_prof, 4.0 / 4.0 / 8.0);
  EXPECT_DOUBLE_EQ(p.p_struct, 3.0 / 4.0);
  EXPECT_NEAR(p.total, 0.4 * 0.5 + 0.4 * 0.125 + 0.2 * 0.75, 1e-12);
  EXPECT_TRUE(std::isinf(penalty_score(target, cand, true).total));
  EXPECT_DOUBLE_EQ(penalty_score(target, target).total, 0.0);
}

TEST(Penalty, TotalIsWeightedSumAndMatchesOracle) {
  gen::Rng rng(61);
  for (int i = 0; i < 500; ++i) {
    const auto a = random_sheet(rng);
    const auto b = random_sheet(rng);
    const auto p = penalty_score(a, b);
    ASSERT_NEAR(p.total, 0.4 * p.p_sent + 0.4 * p.p_prof + 0.2 * p.p_struct, 1e-12);
    ASSERT_NEAR(p.total, oracle::penalty(a, b), 1e-12);
    ASSERT_GE(p.total, 0.0);
    ASSERT_LE(p.total, 1.0);
  }
}

TEST(SelectReference, EqualsLinearScan) {
  gen::Rng rng(62);
  for (int i = 0; i < 50; ++i) {
    const auto target = random_sheet(rng);
    std::vector<LyricsSheet> bank;
    for (int k = 0; k < 100; ++k) bank.push_back(random_sheet(rng));
    ASSERT_EQ(select_reference(target, bank).index, oracle::argmin_reference(target, bank));
  }
}

TEST(SelectReference, TiesAndRejection) {
  const auto target = sheet({{V, 3}, {V, 3}});
  const std::vector<LyricsSheet> bank{sheet({{V, 3}}), sheet({{V, 3}, {V, 3}}), sheet({{V, 3}, {V, 3}})};
  EXPECT_EQ(select_reference(target, bank).index, 1u);
  const std::vector<LyricsSheet> short_only{sheet({{V, 3}})};
  EXPECT_EQ(select_reference(target, short_only).index, 0u);
  try {
    select_reference(target, short_only, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoCandidate);
  }
  EXPECT_THROW(select_reference(target, std::vector<LyricsSheet>{}), Error);
}

TEST(Register, CandidatesCoverOctaveShiftsPerProfile) {
  const auto profiles = default_singer_profiles();
  const auto c = register_candidates(pitches({60, 62, 64}), profiles);
  ASSERT_EQ(c.size(), 6u);
  std::set<std::pair<std::string, int>> seen;
  for (const auto& d : c) seen.insert({d.singer, d.delta});
  const std::set<std::pair<std::string, int>> expect{{"male", -12}, {"male", 0}, {"male", 12},
                                                     {"female", -12}, {"female", 0}, {"female", 12}};
  EXPECT_EQ(seen, expect);
}

TEST(Register, PicksBestCoverageWithTieBreaks) {
  const auto profiles = default_singer_profiles();
  // Fits both singers unshifted: earlier profile wins.
  EXPECT_EQ(register_match(pitches({57, 60, 62}), profiles), (RegisterDecision{"male", 0, 3}));
  // Too high for either: female down an octave.
  EXPECT_EQ(register_match(pitches({79, 81, 84}), profiles), (RegisterDecision{"female", -12, 3}));
  // Too low: male up an octave.
  EXPECT_EQ(register_match(pitches({34, 36, 40}), profiles), (RegisterDecision{"male", 12, 3}));
  EXPECT_THROW(register_match(VocalScore{}, profiles), Error);
}

TEST(Register, DecisionIsMaximalOverAllCandidates) {
  gen::Rng rng(63);
  const auto profiles = default_singer_profiles();
  for (int i = 0; i < 200; ++i) {
    const auto s = gen::random_score(rng, {.min_bars = 1, .max_bars = 4, .low_pitch = 30, .high_pitch = 95});
    const auto d = register_match(s, profiles);
    for (const auto& p : profiles) {
      for (int delta : kOctaveShifts) {
        ASSERT_LE(count_in_range(s, p, delta), d.in_range_count);
      }
    }
  }
}

TEST(Transpose, ShiftsEveryPitchAndGuardsRange) {
  const auto s = apply_transpose(pitches({60, 70}), -12);
  EXPECT_EQ(s.notes[0].pitch, 48);
  EXPECT_EQ(s.notes[1].pitch, 58);
  EXPECT_THROW(apply_transpose(pitches({120}), 12), Error);
}
