#include <iostream>
#include <string>
#include <vector>

#include "corpusforge/cli.h"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return corpusforge::run_cli(args, corpusforge::process_environment(), std::cout, std::cerr);
}
