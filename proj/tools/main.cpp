#include <iostream>

#include "ldg/app/cli.hpp"

int main(int argc, char** argv) { return ldg::app::run_command(argc, argv, std::cout, std::cerr); }
