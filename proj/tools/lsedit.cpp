#include <iostream>

#include "lsedit/cli.hpp"

int main(int argc, char** argv) { return lsedit::cli::dispatch(argc, argv, std::cout, std::cerr); }
