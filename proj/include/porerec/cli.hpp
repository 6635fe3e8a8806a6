#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Command layer: a JSON config (plus dotted --set overrides) drives the
// pipeline stages.  Kept as a library so tests can invoke commands without
// spawning processes.

namespace porerec::cli {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string command;  // analyze, design, train, reconstruct, evaluate, sa
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;   // overrides every stage seed
    std::optional<std::string> out_dir;  // overrides output.dir
    std::vector<std::string> sets;       // "section.key=json-value" overrides
};

// Runs one command; returns the process exit code (0 ok, 2 config error,
// 3 runtime error) and reports problems on stderr.
int run(const Options& opts);

inline constexpr const char* kVersion = "1.0.0";

}  // namespace porerec::cli
