#include "trajcrit/cli.hpp"

int main(int argc, char** argv) { return trajcrit::cli::run(argc, argv); }
