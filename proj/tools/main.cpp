#include <iostream>

#include "shrinkdetect/cli.hpp"

int main(int argc, char** argv) {
  return shrinkdetect::cli::run(argc, argv, std::cout, std::cerr);
}
