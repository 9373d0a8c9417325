#include <iostream>
#include <string>
#include <vector>

#include "qexp/pipeline.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return qexp::run_cli(args, std::cout, std::cerr);
}
