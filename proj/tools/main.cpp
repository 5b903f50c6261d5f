#include <iostream>

#include "cxr/cli.hpp"

int main(int argc, char** argv) { return cxr::run(argc, argv, std::cout, std::cerr); }
