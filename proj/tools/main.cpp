#include <iostream>

#include "noisepuf/cli/commands.hpp"

int main(int argc, char** argv) { return noisepuf::cli::run_cli(argc, argv, std::cout, std::cerr); }
