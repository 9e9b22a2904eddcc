#include "pfeq/cli.hpp"

int main(int argc, char** argv) { return pfeq::cli::run_command(argc, argv); }
