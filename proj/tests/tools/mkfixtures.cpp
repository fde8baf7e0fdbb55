// Regenerates tests/fixtures. Usage: pbl_mkfixtures [DIR]
#include <iostream>

#include "fixtures.hpp"
#include "pbl/ledger_file.hpp"

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : pbl::testing::fixture_dir();
  std::filesystem::create_directories(dir);
  for (const auto& [name, bytes] : pbl::testing::build_fixtures()) {
    pbl::write_file_atomic(dir / name, bytes);
    std::cout << name << " " << bytes.size() << " bytes\n";
  }
  return 0;
}
