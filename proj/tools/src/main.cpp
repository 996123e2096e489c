#include "gca/cli.hpp"

int main(int argc, char** argv) { return gca::cli::main(argc, argv); }
