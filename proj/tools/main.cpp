#include "vrlr/cli.hpp"

int main(int argc, char** argv) { return vrlr::run_cli(argc, argv); }
