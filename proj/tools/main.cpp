#include <iostream>
#include <string>
#include <vector>

#include "ofotune/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return ofotune::run_cli(args, std::cout, std::cerr);
}
