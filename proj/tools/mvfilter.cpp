#include "mvfilter/cli.hpp"

int main(int argc, char** argv) { return mvfilter::main_entry(argc, argv); }
