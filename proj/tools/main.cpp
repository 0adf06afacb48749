#include "cli.hpp"

int main(int argc, char** argv) { return hcrnn::cli::run(argc, argv); }
