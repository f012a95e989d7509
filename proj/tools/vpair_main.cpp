#include "vpair/cli.hpp"

int main(int argc, char** argv) { return vpair::cli::run_cli(argc, argv); }
