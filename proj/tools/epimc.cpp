#include <iostream>

#include "epimc/cli.hpp"

int main(int argc, char** argv) { return epimc::cli::main(argc, argv, std::cout, std::cerr); }
