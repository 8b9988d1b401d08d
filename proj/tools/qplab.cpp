#include "qplab/cli.hpp"

int main(int argc, char** argv) { return qplab::cli_main(argc, argv); }
