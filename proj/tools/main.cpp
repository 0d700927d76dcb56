#include "census_cli.hpp"

int main(int argc, char** argv) { return census::cli::run(argc, argv); }
