#include "demexp/cli_io.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("demexp"));
  return demexp::run_cli(argc, argv, std::cout, std::cerr);
}
