#include <iostream>

#include "rfop/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rfop::run_cli(args, std::cout, std::cerr);
}
