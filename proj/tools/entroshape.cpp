#include <iostream>

#include "entroshape/cli.hpp"

int main(int argc, char** argv) { return entroshape::cli::run(argc, argv, std::cout, std::cerr); }
