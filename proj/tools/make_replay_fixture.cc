// Writes the synthetic replay fixture used by the end-to-end tests.
//
//   make_replay_fixture <dir> [--identical] [--seed N]

#include <cstdlib>
#include <iostream>
#include <string>

#include "ediag/error.h"
#include "ediag/pipeline.h"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_replay_fixture <dir> [--identical] [--seed N]\n";
    return 2;
  }
  ediag::FixtureOptions options;
  for (int i = 2; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--identical") {
      options.identical_variants = true;
    } else if (arg == "--seed" && i + 1 < argc) {
      options.seed = std::strtoull(argv[++i], nullptr, 10);
    } else {
      std::cerr << "unknown argument " << arg << "\n";
      return 2;
    }
  }
  try {
    ediag::GenerateReplayFixture(argv[1], options);
  } catch (const ediag::Error& e) {
    std::cerr << "make_replay_fixture: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
