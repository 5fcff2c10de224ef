#include <iostream>

#include "mpt/cli.hpp"

int main(int argc, char** argv) {
  return mpt::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
