#include "lundq/cli.hpp"

int main(int argc, char** argv) { return lundq::cli::run_cli(argc, argv); }
