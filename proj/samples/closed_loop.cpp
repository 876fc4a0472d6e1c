// Runs the whole pipeline on a score file and prints the self-report.
#include <iostream>

#include "songpipe/songpipe.hpp"

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: closed_loop SCORE OUT_DIR\n";
    return 2;
  }
  songpipe::PipelineConfig config;
  config.score_path = argv[1];
  config.output_dir = argv[2];
  try {
    const auto result = songpipe::run_pipeline(config);
    std::cout << songpipe::eval_to_text(result.report);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
}
