#include <invlab/cli.hpp>

int main(int argc, char** argv) { return invlab::cli::run_cli(argc, argv); }
