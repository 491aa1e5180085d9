#include "isqld/cli.hpp"

int main(int argc, char** argv) { return isqld::cli::main(argc, argv); }
