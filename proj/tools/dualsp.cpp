#include "dualsp/cli.hpp"

int main(int argc, char** argv) { return dualsp::cli::main_entry(argc, argv); }
