#include <iostream>

#include "rpg/harness.hpp"

int main(int argc, char** argv) { return rpg::harness::cli_main(argc, argv, std::cout, std::cerr); }
