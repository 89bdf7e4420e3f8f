#include "hgame/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return hgame::cli_main(std::move(args));
}
