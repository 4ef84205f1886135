#include <iostream>

#include "flicker/cli/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return flicker::run_cli(args, std::cout, std::cerr);
}
