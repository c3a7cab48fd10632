#include <iostream>
#include <string>
#include <vector>

#include "iwseg_cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return iwseg::cli::run(args, std::cout, std::cerr);
}
