#include <iostream>

#include "thyia/cli.hpp"

int main(int argc, char** argv) { return thyia::RunCli(argc, argv, std::cout, std::cerr); }
