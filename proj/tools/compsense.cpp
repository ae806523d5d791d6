#include "compsense/cli.hpp"

int main(int argc, char** argv) { return compsense::run_cli(argc, argv); }
