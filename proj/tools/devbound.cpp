#include "devbound/cli.hpp"

int main(int argc, char** argv) { return devbound::cli::run(argc, argv); }
