#include <iostream>

#include "dagmix/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dagmix::cli::run(args, std::cout, std::cerr);
}
