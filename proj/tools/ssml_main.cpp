#include <iostream>

#include "ssml/cli.hpp"

int main(int argc, char** argv) {
  return ssml::cli::run(argc, argv, std::cout, std::cerr);
}
