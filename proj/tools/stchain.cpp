#include <string>
#include <vector>

#include <stchain/cli.hpp>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return stchain::cli::execute(args);
}
