#include "equiorb/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return equiorb::run_cli(argc, argv, std::cout, std::cerr); }
