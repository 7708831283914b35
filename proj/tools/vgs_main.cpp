#include "vgs/cli.hpp"

int main(int argc, char** argv) { return vgs::cli_main(argc, argv); }
