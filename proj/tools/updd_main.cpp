#include <iostream>
#include <string>
#include <vector>

#include "updd/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return updd::run_cli(args, std::cout, std::cerr);
}
