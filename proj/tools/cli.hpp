#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cimllm/features.hpp"

namespace cimllm::cli {

/// Runs one command line (args[0] is the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Flat JSON object of ExtractionParams fields; absent keys keep defaults.
ExtractionParams parse_extraction_params(std::string_view json);

}  // namespace cimllm::cli
