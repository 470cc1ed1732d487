#include "fss/cli.hpp"

int main(int argc, char** argv) { return fss::run_command(argc, argv); }
