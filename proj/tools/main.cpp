#include <iostream>

#include "asetrap/io/commands.hpp"

int main(int argc, char** argv) { return asetrap::io::run_cli(argc, argv, std::cout, std::cerr); }
