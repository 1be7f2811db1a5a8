#include "squadplan/cli.hpp"

int main(int argc, char** argv) { return squadplan::cli::run(argc, argv); }
