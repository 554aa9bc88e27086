#include "stlsynth/cli.hpp"

int main(int argc, char** argv) {
    return stlsynth::cli::run_command(std::vector<std::string>(argv + 1, argv + argc));
}
