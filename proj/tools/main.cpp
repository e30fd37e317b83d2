#include "bidscape/cli.hpp"

int main(int argc, char** argv) { return bidscape::cli_main(argc, argv); }
