#include <iostream>
#include <string>
#include <vector>

#include "bandlime/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return bandlime::cli::run(args, std::cout, std::cerr);
}
