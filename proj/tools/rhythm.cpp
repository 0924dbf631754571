#include "rhythm/cli.hpp"

int main(int argc, char** argv) { return rhythm::cli_dispatch(argc, argv); }
