#include "driftbayes/cli.hpp"

int main(int argc, char** argv) { return driftbayes::cli::run_command(argc, argv); }
