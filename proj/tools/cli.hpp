#pragma once

#include <string>
#include <vector>

namespace cagewarp::app {

/// Entry point of the `cagewarp` command. Never throws. Exit codes:
/// 0 success, 1 pipeline or I/O failure (one-line diagnostic on stderr),
/// 2 usage error.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args[0] is the program name

/// Reads CAGEWARP_LOG (error | info | debug; default info).
void configure_logging();

}  // namespace cagewarp::app
