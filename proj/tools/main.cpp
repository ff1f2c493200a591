#include "mfclust/cli.hpp"

int main(int argc, char** argv) { return mfclust::run_cli(argc, argv); }
