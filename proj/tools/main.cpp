#include <iostream>

#include "hometap/cli.hpp"

int main(int argc, char** argv) {
    return hometap::cli::run(argc, argv, std::cout, std::cerr);
}
