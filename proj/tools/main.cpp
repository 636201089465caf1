#include "cli.hpp"
#include "rankgauntlet/runtime.hpp"

int main(int argc, char** argv) {
  rankgauntlet::tune_allocator();
  return rankgauntlet::cli::main(argc, argv);
}
