#pragma once

#include <string>
#include <vector>

namespace sparselets {

/// Entry point of the `sparselets` tool. Exit status: 0 success, 1 runtime
/// failure, 2 usage error.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace sparselets
