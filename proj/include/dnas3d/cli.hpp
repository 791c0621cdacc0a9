#pragma once

#include <string>
#include <vector>

namespace dnas3d::cli {

// Exit codes: 0 success, 1 runtime failure, 2 bad arguments.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace dnas3d::cli
