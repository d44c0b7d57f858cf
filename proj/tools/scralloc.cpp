#include "scralloc/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return scralloc::cli::run(argc, argv, std::cout, std::cerr);
}
