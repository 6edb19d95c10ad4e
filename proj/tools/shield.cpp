#include "shield/cli.hpp"

int main(int argc, char** argv)
{
    return shield::cli::run(argc, argv);
}
