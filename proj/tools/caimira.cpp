#include "caimira/cli.hpp"

int main(int argc, char** argv) { return caimira::cli::run(argc, argv); }
