#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "harness/cli.hpp"

int main(int argc, char** argv) {
  const char* env = std::getenv("STOKIT_SEED");
  std::vector<std::string> args(argv + 1, argv + argc);
  return stokit::harness::run_cli(args, std::cout, std::cerr, env ? std::optional<std::string>(env) : std::nullopt);
}
