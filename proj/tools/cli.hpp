#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rankgauntlet::cli {

// Exit codes: 0 success, 1 oracle failure, 2 config error, 3 runtime error.
int main(int argc, char** argv);

struct RunOptions {
  std::optional<std::string> config;
  std::vector<std::string> overrides;
  std::string out = "runs";
};

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err);
int cmd_sweep(const RunOptions& opts, const std::string& axis, const std::vector<std::string>& values, int jobs,
              std::ostream& out, std::ostream& err);
int cmd_verify(std::uint64_t seed, std::ostream& out);

}  // namespace rankgauntlet::cli
