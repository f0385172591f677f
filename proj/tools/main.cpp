#include <iostream>

#include "pnrsim/cli.hpp"

int main(int argc, char** argv) { return pnrsim::cli::run(argc, argv, std::cout, std::cerr); }
