#include <iostream>
#include <string>
#include <vector>

#include "fusionret/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return fusionret::cli::run_cli(args, std::cout, std::cerr);
}
