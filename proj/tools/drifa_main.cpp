#include <iostream>

#include "drifa/cli.hpp"

int main(int argc, char** argv) { return drifa::cli_main(argc, argv, std::cout, std::cerr); }
