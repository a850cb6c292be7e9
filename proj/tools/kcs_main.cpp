#include "kcs/cli_io.hpp"

int main(int argc, char** argv) { return kcs::run_cli(argc, argv); }
