#include "lspc/cli/cli.hpp"

int main(int argc, char** argv) { return lspc::cli::run(argc, argv); }
