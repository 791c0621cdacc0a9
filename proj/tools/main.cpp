#include "dnas3d/cli.hpp"

int main(int argc, char** argv) { return dnas3d::cli::run(argc, argv); }
