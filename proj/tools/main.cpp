#include <string>
#include <vector>

#include "evmarl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return evmarl::run_cli(args);
}
