#include <iostream>

#include "csvgd/experiment.hpp"

int main(int argc, char** argv) {
  return csvgd::run_cli(argc, argv, std::cout, std::cerr);
}
