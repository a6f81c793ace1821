#include "rdest_cli.hpp"

int main(int argc, char** argv) { return rdest::cli::run(argc, argv); }
