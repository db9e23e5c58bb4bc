#include <iostream>
#include <string>
#include <vector>

#include "credo/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return credo::run(args, std::cout, std::cerr);
}
