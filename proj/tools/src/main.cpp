#include <iostream>

#include "propmatch/service/cli.hpp"

int main(int argc, char** argv) { return propmatch::service::RunCli(argc, argv, std::cout, std::cerr); }
