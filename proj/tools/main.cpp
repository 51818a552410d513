#include <iostream>

#include "molbuild/cli.hpp"

int main(int argc, char** argv) { return molbuild::run_cli(argc, argv, std::cout, std::cerr); }
