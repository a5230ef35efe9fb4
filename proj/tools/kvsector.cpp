#include <iostream>
#include <string>
#include <vector>

#include "kvsector/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return kvsector::run_cli(args, std::cout, std::cerr);
}
