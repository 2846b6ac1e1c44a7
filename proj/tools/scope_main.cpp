#include "scope/cli.hpp"

int main(int argc, char** argv) { return scope::cli::main(argc, argv); }
