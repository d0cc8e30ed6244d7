#include <iostream>

#include "bipembed/cli.hpp"

int main(int argc, char** argv) { return bipembed::dispatch(argc, argv, std::cout, std::cerr); }
