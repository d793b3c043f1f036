#include "bag/cli.hpp"

int main(int argc, char** argv) { return bag::cli::dispatch(argc, argv); }
