#include "rwbound/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return rwbound::run_cli(argc, argv, std::cout, std::cerr); }
