#include <iostream>
#include <string>
#include <vector>

#include "oasic/cli.hpp"

int main(int argc, char** argv) {
  return oasic::cli_dispatch(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
