#include <iostream>

#include "l0flow/cli.hpp"

int main(int argc, char** argv) { return l0flow::run_cli(argc, argv, std::cout, std::cerr); }
