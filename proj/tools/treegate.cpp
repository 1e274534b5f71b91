#include <iostream>

#include "treegate/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return treegate::run_cli(args, std::cout, std::cerr);
}
