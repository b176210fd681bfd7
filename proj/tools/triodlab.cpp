#include <iostream>

#include "triodlab/cli.hpp"

int main(int argc, char** argv) { return triodlab::cli::run_cli(argc, argv, std::cout, std::cerr); }
