#include <iostream>
#include <string>
#include <vector>

#include "emg_affect/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return emg::run_cli(args, std::cout, std::cerr);
}
