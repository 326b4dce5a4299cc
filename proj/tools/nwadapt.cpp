#include "nwadapt/cli.hpp"

int main(int argc, char** argv) { return nwadapt::run_cli(argc, argv); }
