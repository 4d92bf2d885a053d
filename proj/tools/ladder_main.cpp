#include "ladder/cli/commands.hpp"

int main(int argc, char** argv) { return ladder::cli::run_cli(argc, argv); }
