#include "marssl/cli.hpp"

int main(int argc, char** argv) { return marssl::cli::run(argc, argv); }
