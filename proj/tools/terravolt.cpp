#include "terravolt/cli.hpp"

int main(int argc, char** argv) { return terravolt::cli_main(argc, argv); }
