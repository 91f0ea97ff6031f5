#include "cli.hpp"

int main(int argc, char** argv) { return cagewarp::app::run_cli(argc, argv); }
