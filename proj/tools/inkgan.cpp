#include "inkgan/cli.hpp"

int main(int argc, char** argv) { return inkgan::run_cli(argc, argv); }
