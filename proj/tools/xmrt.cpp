#include "xmrt/cli.hpp"

int main(int argc, char** argv) { return xmrt::cli_main(argc, argv); }
