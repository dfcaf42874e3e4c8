#include "zic/cli.hpp"

int main(int argc, char** argv) { return zic::cli::run(argc, argv); }
