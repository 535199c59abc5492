#include <iostream>
#include <string>
#include <vector>

#include "histocam/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return histocam::cli::run(args, std::cout, std::cerr);
}
