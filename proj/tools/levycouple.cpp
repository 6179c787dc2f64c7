#include <iostream>
#include <string>
#include <vector>

#include "levycouple/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return levycouple::cli::run(std::move(args), std::cout, std::cerr);
}
