#include "rancor/cli.hpp"

int main(int argc, char** argv) { return rancor::cli_main(argc, argv); }
