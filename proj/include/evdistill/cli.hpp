#pragma once

#include <string>
#include <vector>

namespace evdistill::cli {

// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
// failure.
int run(int argc, const char* const* argv);

// Same entry point for in-process callers; args exclude the program name.
int run(const std::vector<std::string>& args);

}  // namespace evdistill::cli
