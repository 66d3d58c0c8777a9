#include <iostream>

#include "monofill/cli.hpp"

int main(int argc, char** argv) { return monofill::cli::run(argc, argv, std::cout, std::cerr); }
