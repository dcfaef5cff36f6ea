#include <string>
#include <vector>

#include "sparsecov/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sparsecov::cli::run(args);
}
