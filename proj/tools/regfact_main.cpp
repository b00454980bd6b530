#include "regfact/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return regfact::cli_main(argc, argv, std::cout, std::cerr);
}
