#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return bonelayer::cli::run(argc, argv, std::cout, std::cerr); }
