#include "modelraider/cli.hpp"

#include <iostream>

int main(int argc, char **argv) { return modelraider::cli(argc, argv, std::cout, std::cerr); }
