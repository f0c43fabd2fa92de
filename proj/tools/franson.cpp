#include <franson/cli.hpp>

#include <iostream>

int main(int argc, char** argv) { return franson::cli::run(argc, argv, std::cout, std::cerr); }
