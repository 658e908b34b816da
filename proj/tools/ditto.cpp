#include "ditto/cli.hpp"

int main(int argc, char** argv) { return ditto::cli::run(argc, argv); }
