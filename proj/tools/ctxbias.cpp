#include <iostream>

#include "ctxbias/cli.hpp"

int main(int argc, char** argv) { return ctxbias::run_cli(argc, argv, std::cout, std::cerr); }
