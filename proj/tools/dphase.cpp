#include "dphase/cli.hpp"

int main(int argc, char** argv) { return dphase::cli::run(argc, argv); }
