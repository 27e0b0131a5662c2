#include <iostream>

#include "chamber/cli.hpp"

int main(int argc, char** argv) {
  return chamber::run_cli(argc, argv, std::cout, std::cerr);
}
