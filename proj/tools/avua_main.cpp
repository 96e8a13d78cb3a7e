#include <iostream>
#include <string>
#include <vector>

#include "avua/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return avua::cli::run(args, std::cout, std::cerr);
}
