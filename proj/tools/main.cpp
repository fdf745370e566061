#include <string>
#include <vector>

#include "grushin/cli.hpp"

int main(int argc, char** argv) {
  return grushin::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
