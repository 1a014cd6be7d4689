#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return psplit::cli::run(argc, argv, std::cout, std::cerr); }
