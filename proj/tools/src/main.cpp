#include "blsat_cli/cli.hpp"

int main(int argc, char** argv) { return blsat::cli::run(argc, argv); }
