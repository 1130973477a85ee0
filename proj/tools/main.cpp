#include <string>
#include <vector>

#include "proprio/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return proprio::run_command(args);
}
