#include <iostream>

#include "cli.hpp"
#include "pfcast/config.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pfcast::cli::run(args, std::cout, std::cerr, pfcast::pf_environment());
}
