#include <iostream>

#include "vqforge/cli.hpp"

int main(int argc, char** argv) { return vqforge::run_cli(argc, argv, std::cout, std::cerr); }
