#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gamenet::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kMissingInput = 3,
    kDimensionMismatch = 4,
    kDataError = 5,
    kNumericError = 6,
    kStateError = 7,
};

const std::vector<std::string>& subcommands();

struct RunOptions {
    std::filesystem::path config;
    std::filesystem::path workspace = ".";
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
};

/// Effective run configuration: the config document with the seed override applied.
struct RunContext {
    nlohmann::json config;
    std::filesystem::path workspace;
    std::uint64_t seed = 46;
    std::size_t threads = 1;

    std::filesystem::path path(const std::string& rel) const { return workspace / rel; }
    nlohmann::json section(const std::string& name) const;
};

RunContext load_context(const RunOptions& opts);

/// Runs one subcommand and writes manifests/<subcommand>.json.
void run_subcommand(const std::string& name, const RunContext& ctx, std::ostream& log);

/// Maps an in-flight exception to its exit code.
int exit_code_for(std::exception_ptr e);

} // namespace gamenet::cli
