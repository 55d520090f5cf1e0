#include "yflash/cli.hpp"

int main(int argc, char** argv) { return yflash::cli::run_cli(argc, argv); }
