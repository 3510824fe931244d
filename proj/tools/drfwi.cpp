#include <iostream>

#include "drfwi/cli.hpp"

int main(int argc, char** argv) { return drfwi::cli::run(argc, argv, std::cout, std::cerr); }
