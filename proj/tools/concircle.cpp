#include "concircle/cli/commands.hpp"

int main(int argc, char** argv) { return concircle::cli::run(argc, argv); }
