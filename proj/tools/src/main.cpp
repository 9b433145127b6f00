#include "dna_tools/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return dna::cli::run_cli(argc, argv, std::cout, std::cerr); }
