#include "ncf/cli.hpp"

int main(int argc, char** argv) { return ncf::cli::parse_and_dispatch(argc, argv); }
