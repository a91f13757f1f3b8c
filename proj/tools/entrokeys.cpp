#include "entrokeys/cli.hpp"

int main(int argc, char** argv) { return entrokeys::cli::run(argc, argv); }
