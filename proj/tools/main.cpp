#include "cli.hpp"

int main(int argc, char** argv) { return merge::cli::dispatch(argc, argv); }
