#include <iostream>

#include "imle/commands.hpp"

int main(int argc, char** argv) { return imle::RunCli(argc, argv, std::cout, std::cerr); }
