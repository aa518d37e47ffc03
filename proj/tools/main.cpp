#include "xsection/cli.hpp"

int main(int argc, char** argv) { return xs::run_cli(argc, argv); }
