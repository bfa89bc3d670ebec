#include "sphobs/cli.hpp"

int main(int argc, char** argv) { return sphobs::run_cli(argc, argv); }
