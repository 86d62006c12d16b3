#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace mockless {

struct ProcessResult {
    int exit_code = -1;  // 128 + signal when killed by a signal
    bool timed_out = false;
    std::string out;
    std::string err;
    double seconds = 0.0;
};

/// Runs argv[0] (PATH lookup) in `cwd` with stdout/stderr captured. On timeout
/// the whole process group is killed. A program that cannot be started
/// yields exit code 127 and the reason on `err`.
ProcessResult run_process(const std::vector<std::string>& argv, const std::string& cwd,
                          std::chrono::milliseconds timeout);

/// Absolute path of an executable, looking through PATH for bare names.
std::optional<std::string> find_executable(const std::string& name);

}  // namespace mockless
