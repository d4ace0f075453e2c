#include <iostream>

#include "pgkm/cli.hpp"

int main(int argc, char** argv) {
    return pgkm::cli::run(argc, argv, std::cout, std::cerr);
}
