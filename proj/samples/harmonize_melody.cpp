// Harmonizes a short melody, adds the intro, and prints the plan.
#include <iostream>

#include "songpipe/songpipe.hpp"

int main() {
  using namespace songpipe;
  VocalScore score;
  score.title = "example";
  const Tick q = score.ticks_per_quarter;
  const int melody[] = {60, 64, 67, 64, 62, 67, 71, 67, 57, 60, 64, 60, 65, 69, 72, 69};
  Tick t = 0;
  for (int pitch : melody) {
    score.notes.push_back({t, q, pitch, std::nullopt});
    t += q;
  }
  score.sections = {{SectionLabel::kVerse, 0, t, std::nullopt}};

  const auto reg = register_match(score, default_singer_profiles());
  std::cout << "register: " << reg.singer << " " << reg.delta << "\n";

  const auto chords = prepend_intro_chords(harmonize(score), opening_bar_seconds(score));
  std::cout << write_chords(chords);

  const auto song = prepend_intro_bars(score);
  std::cout << format_plan_table(plan_inference(song), &song);
}
