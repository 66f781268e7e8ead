#include <iostream>

#include "forkstore/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return forkstore::cli::run(std::move(args), std::cout, std::cerr, std::cin);
}
