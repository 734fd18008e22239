#pragma once

#include <string>
#include <vector>

namespace dln {

// Entry point behind the dln binary; also callable from tests.
// Subcommands: gen-data, train, scan, verify.
// Exit codes: 0 ok, 1 check failure, 2 usage error, 3 divergence.
int run_cli(const std::vector<std::string>& args);

}  // namespace dln
