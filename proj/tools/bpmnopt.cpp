#include "bpmnopt/cli.hpp"

int main(int argc, char** argv) { return bpmnopt::run_cli(argc, argv); }
