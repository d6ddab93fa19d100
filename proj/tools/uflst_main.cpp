#include <iostream>

#include "uflst/cli.hpp"

int main(int argc, char** argv) { return uflst::run_cli(argc, argv, std::cout, std::cerr); }
