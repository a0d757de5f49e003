#include "grip/cli.hpp"

int main(int argc, char** argv) { return grip::run_cli(argc, argv); }
