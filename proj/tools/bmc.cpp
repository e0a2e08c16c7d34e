#include <iostream>

#include "bmc/cli.hpp"

int main(int argc, char** argv) { return bmc::run_cli(argc, argv, std::cout, std::cerr); }
