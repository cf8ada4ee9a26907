#include "agreesum/cli.hpp"

int main(int argc, char** argv) {
  return agreesum::cli::run(std::vector<std::string>(argv, argv + argc));
}
