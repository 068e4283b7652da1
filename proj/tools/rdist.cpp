#include <iostream>

#include "rdist/cli.hpp"

int main(int argc, char** argv) {
  return rdist::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
