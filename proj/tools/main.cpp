#include "crowdloc/cli.hpp"

int main(int argc, char** argv) { return crowdloc::run_cli(argc, argv); }
