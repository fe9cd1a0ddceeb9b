#include "commands.hpp"

int main(int argc, char** argv) { return fusiform::cli::run(argc, argv); }
