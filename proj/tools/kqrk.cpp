#include <iostream>

#include "kqrk/cli.hpp"

int main(int argc, char** argv) { return kqrk::cli::dispatch(argc, argv, std::cout, std::cerr); }
