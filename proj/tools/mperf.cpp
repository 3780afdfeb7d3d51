#include <iostream>

#include "mperf/cli.hpp"

int main(int argc, char** argv) { return mperf::cli::run_cli(argc, argv, std::cout, std::cerr); }
