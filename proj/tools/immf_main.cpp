#include <iostream>

#include "immf/bench/cli.hpp"

int main(int argc, char** argv) { return immf::bench::run_cli(argc, argv, std::cout, std::cerr); }
