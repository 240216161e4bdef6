#include "ckpt/cli.hpp"

int main(int argc, char** argv) { return ckpt::cli_dispatch(argc, argv); }
