#include "evdistill/cli.hpp"

int main(int argc, char** argv) { return evdistill::cli::run(argc, argv); }
