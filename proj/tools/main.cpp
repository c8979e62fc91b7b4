#include "cli.hpp"

int main(int argc, char** argv) { return qtherm::cli::main_entry(argc, argv); }
