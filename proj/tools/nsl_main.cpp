#include <string>
#include <vector>

#include "nsl/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return nsl::run_cli(args);
}
