#include "essd/cli.hpp"

int main(int argc, char** argv) { return essd::run_cli(argc, argv); }
