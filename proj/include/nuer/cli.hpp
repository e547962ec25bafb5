#pragma once

#include <string>
#include <vector>

namespace nuer::cli {

// Entry point shared by the binary and the tests. Returns the process exit
// code: 0 success, 2 usage error, 3 I/O error, 4 schema/format violation,
// 5 invalid argument, 1 anything else. Errors are one machine-parseable
// line on stderr: "error: <category>: <message>".
int run(const std::vector<std::string>& args);

}  // namespace nuer::cli
