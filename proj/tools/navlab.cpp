#include "navlab/cli.hpp"

int main(int argc, char** argv) { return navlab::run_cli(argc, argv); }
