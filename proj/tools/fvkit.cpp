#include <iostream>

#include "fvkit/cli.hpp"

int main(int argc, char** argv) {
  return fvkit::cli::run(argc, argv, std::cout, std::cerr);
}
