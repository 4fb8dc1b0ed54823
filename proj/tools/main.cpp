#include <iostream>

#include "exfl/cli.hpp"

int main(int argc, char** argv) { return exfl::cli_dispatch(argc, argv, std::cout, std::cerr); }
