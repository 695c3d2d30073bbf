#include "sentidistill/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sentidistill::run_command(args);
}
