#include "ensemblekit/cli.hpp"

int main(int argc, char** argv) { return ensemblekit::cli::dispatch(argc, argv); }
