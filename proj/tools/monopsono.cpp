#include <iostream>
#include <string>
#include <vector>

#include <monopsono/cli.hpp>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return monopsono::cli::run(args, std::cout, std::cerr);
}
