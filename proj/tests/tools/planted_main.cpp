// Writes the synthetic planted corpus used by the end-to-end tests.
#include <cstdlib>
#include <iostream>
#include <string>

#include "planted.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: mgcs_planted OUT_DIR [FUNCTIONS] [SEED]\n";
    return 1;
  }
  mgcs::testing::PlantedOptions opts;
  if (argc > 2) opts.functions = std::strtoull(argv[2], nullptr, 10);
  if (argc > 3) opts.seed = std::strtoull(argv[3], nullptr, 10);
  mgcs::testing::write_planted(argv[1], opts);
  return 0;
}
