#include <iostream>

#include "cogload/cli.hpp"

int main(int argc, char** argv) { return cogload::cli::run(argc, argv, std::cout, std::cerr); }
