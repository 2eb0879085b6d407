#include <iostream>

#include "symplan/cli.hpp"

int main(int argc, char** argv) {
  return symplan::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
