#include "fresel/cli.hpp"

int main(int argc, char** argv) { return fresel::cli::run(argc, argv); }
