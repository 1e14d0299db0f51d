#include <iostream>

#include "mfpc/cli.hpp"

int main(int argc, char** argv) { return mfpc::run_cli(argc, argv, std::cout, std::cerr); }
