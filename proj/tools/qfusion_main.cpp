#include "qfusion/cli.hpp"

int main(int argc, char** argv) { return qfusion::cli::run(argc, argv); }
