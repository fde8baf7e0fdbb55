#include <iostream>

#include "pbl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pbl::cli::run(args, std::cout, std::cerr, pbl::cli::Env::process());
}
