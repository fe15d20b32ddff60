#pragma once

#include "gamenet/network.hpp"
#include "gamenet/optim.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>

namespace gamenet::nn {

using Json = nlohmann::json;

inline constexpr int kCheckpointVersion = 1;

Json to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json to_json(const Activation& a);
Activation activation_from_json(const Json& j);

Json to_json(const DenseLayerSpec& s);
DenseLayerSpec layer_spec_from_json(const Json& j);

/// Layer specs, batchnorm settings, parameter values and running statistics.
Json to_json(const DenseStack& stack);
DenseStack stack_from_json(const Json& j);

/// Optimizer config, step count and both moment arrays.
Json to_json(const Optimizer& opt);
OptimizerConfig optimizer_config_from_json(const Json& j);
Json to_json(const OptimizerConfig& cfg);
/// Restores moments into an optimizer already bound to matching parameters.
void load_optimizer_state(Optimizer& opt, const Json& j);

/// Versioned network checkpoint: {format, version, seed, network, optimizer?}.
Json make_checkpoint(const DenseStack& stack, std::uint64_t seed, const Optimizer* opt = nullptr);
struct LoadedCheckpoint {
    DenseStack network;
    std::uint64_t seed = 0;
    std::optional<Json> optimizer;
};
LoadedCheckpoint read_checkpoint(const Json& j);

void write_json_file(const std::filesystem::path& path, const Json& j);
Json read_json_file(const std::filesystem::path& path);

} // namespace gamenet::nn
