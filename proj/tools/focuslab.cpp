#include <iostream>

#include "focuslab/cli.hpp"

int main(int argc, char** argv) { return focuslab::cli_main(argc, argv, std::cout, std::cerr); }
