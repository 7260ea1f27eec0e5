#include "sparselets/cli.hpp"

int main(int argc, char** argv) { return sparselets::run(argc, argv); }
