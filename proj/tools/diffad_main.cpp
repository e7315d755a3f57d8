#include "diffad/commands.hpp"

int main(int argc, char** argv) {
    return diffad::run_cli(argc, argv);
}
