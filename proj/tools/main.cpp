#include "cli.hpp"

int main(int argc, char** argv) { return asyco::cli::run(argc, argv); }
