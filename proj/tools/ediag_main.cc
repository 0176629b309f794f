#include <iostream>
#include <string>
#include <vector>

#include "ediag/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ediag::Dispatch(args, std::cout, std::cerr);
}
