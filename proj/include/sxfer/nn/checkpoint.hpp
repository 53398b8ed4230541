#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sxfer/nn/mlp.hpp"

namespace sxfer::nn {

inline constexpr int kCheckpointVersion = 1;

// Checkpoint layout (text, one record per line):
//   line 1      JSON header: format, version, architecture, fingerprint,
//               input_scale, seed, provenance, and one descriptor per block
//               {layer, kind, rows, cols, sha256}
//   following   "<layer> weights <base64>" and "<layer> biases <base64>" in
//               layer order; payloads are row-major little-endian float64.
std::string serialize_model(const MlpModel& model);
MlpModel parse_model(const std::string& text, const std::optional<std::string>& expected_fingerprint = std::nullopt);

void save_model(const MlpModel& model, const std::filesystem::path& path);
// A mismatching expected_fingerprint raises CompatibilityError.
MlpModel load_model(const std::filesystem::path& path,
                    const std::optional<std::string>& expected_fingerprint = std::nullopt);

// Shared by the multi-task checkpoint.
struct EncodedBlock {
    nlohmann::json descriptor;
    std::string line;
};
std::vector<EncodedBlock> encode_layer(const DenseLayer& layer, const std::string& label);
std::vector<std::string> checkpoint_lines(const std::string& text);
// Reads the weights and biases lines for one layer starting at `lines[pos]`.
DenseLayer decode_layer(const LayerShape& shape, const std::string& label, const nlohmann::json& weight_descriptor,
                        const nlohmann::json& bias_descriptor, const std::vector<std::string>& lines,
                        std::size_t& pos);

}  // namespace sxfer::nn
