#include "kernelforge/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return kernelforge::run_cli(argc, argv, std::cout, std::cerr); }
