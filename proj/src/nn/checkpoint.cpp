#include "sxfer/nn/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "sxfer/error.hpp"
#include "sxfer/hash.hpp"
#include "sxfer/io.hpp"

namespace sxfer::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads assume a little-endian host");

namespace {

std::vector<std::byte> row_major_bytes(const Eigen::MatrixXd& m) {
    std::vector<std::byte> bytes(static_cast<std::size_t>(m.size()) * sizeof(double));
    std::size_t offset = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            std::memcpy(bytes.data() + offset, &v, sizeof v);
            offset += sizeof v;
        }
    }
    return bytes;
}

EncodedBlock encode_block(const Eigen::MatrixXd& m, const std::string& label, const std::string& kind) {
    const auto bytes = row_major_bytes(m);
    EncodedBlock block;
    block.descriptor = {{"layer", label}, {"kind", kind}, {"rows", m.rows()}, {"cols", m.cols()},
                        {"sha256", sha256_hex(bytes)}};
    block.line = label + " " + kind + " " + base64_encode(bytes);
    return block;
}

Eigen::MatrixXd decode_block(const nlohmann::json& descriptor, const std::string& label, const std::string& kind,
                             const std::string& line) {
    const std::string prefix = label + " " + kind + " ";
    if (line.rfind(prefix, 0) != 0) {
        throw FormatError("checkpoint: expected block '" + label + " " + kind + "'");
    }
    const auto bytes = base64_decode(std::string_view(line).substr(prefix.size()));
    const auto rows = descriptor.at("rows").get<Eigen::Index>();
    const auto cols = descriptor.at("cols").get<Eigen::Index>();
    if (bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(double)) {
        throw FormatError("checkpoint: block '" + label + " " + kind + "' has the wrong length");
    }
    if (sha256_hex(bytes) != descriptor.at("sha256").get<std::string>()) {
        throw FormatError("checkpoint: block '" + label + " " + kind + "' failed its checksum");
    }
    Eigen::MatrixXd m(rows, cols);
    std::size_t offset = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            double v;
            std::memcpy(&v, bytes.data() + offset, sizeof v);
            offset += sizeof v;
            if (!std::isfinite(v)) throw FormatError("checkpoint: block '" + label + " " + kind + "' holds non-finite values");
            m(r, c) = v;
        }
    }
    return m;
}

}  // namespace

std::vector<std::string> checkpoint_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

std::vector<EncodedBlock> encode_layer(const DenseLayer& layer, const std::string& label) {
    return {encode_block(layer.weights, label, "weights"), encode_block(Eigen::MatrixXd(layer.biases), label, "biases")};
}

DenseLayer decode_layer(const LayerShape& shape, const std::string& label, const nlohmann::json& weight_descriptor,
                        const nlohmann::json& bias_descriptor, const std::vector<std::string>& lines,
                        std::size_t& pos) {
    if (pos + 2 > lines.size()) throw FormatError("checkpoint: missing blocks for layer " + label);
    DenseLayer layer;
    layer.activation = shape.activation;
    layer.weights = decode_block(weight_descriptor, label, "weights", lines[pos++]);
    const Eigen::MatrixXd biases = decode_block(bias_descriptor, label, "biases", lines[pos++]);
    if (layer.weights.rows() != static_cast<Eigen::Index>(shape.fan_out) ||
        layer.weights.cols() != static_cast<Eigen::Index>(shape.fan_in) ||
        biases.rows() != static_cast<Eigen::Index>(shape.fan_out) || biases.cols() != 1) {
        throw FormatError("checkpoint: layer " + label + " blocks do not match the architecture");
    }
    layer.biases = biases.col(0);
    return layer;
}

std::string serialize_model(const MlpModel& model) {
    nlohmann::json header;
    header["format"] = "sxfer-mlp";
    header["version"] = kCheckpointVersion;
    header["architecture"] = architecture_to_json(model.architecture());
    header["fingerprint"] = model.fingerprint();
    header["input_scale"] = model.input_scale;
    header["seed"] = model.seed;
    header["provenance"] = model.provenance;
    std::string body;
    auto blocks = nlohmann::json::array();
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        for (auto& block : encode_layer(model.layers[l], std::to_string(l))) {
            blocks.push_back(block.descriptor);
            body += block.line + "\n";
        }
    }
    header["blocks"] = blocks;
    return header.dump() + "\n" + body;
}

MlpModel parse_model(const std::string& text, const std::optional<std::string>& expected_fingerprint) {
    const auto lines = checkpoint_lines(text);
    if (lines.empty()) throw FormatError("checkpoint: empty file");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(lines[0]);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
    }
    MlpModel model;
    try {
        if (header.at("format").get<std::string>() != "sxfer-mlp") throw FormatError("checkpoint: not an MLP checkpoint");
        const int version = header.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw FormatError("checkpoint: version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
        }
        const auto arch = architecture_from_json(header.at("architecture"));
        const auto fingerprint = architecture_fingerprint(arch);
        if (header.at("fingerprint").get<std::string>() != fingerprint) {
            throw FormatError("checkpoint: stored fingerprint does not match the architecture");
        }
        if (expected_fingerprint && *expected_fingerprint != fingerprint) {
            throw CompatibilityError("checkpoint fingerprint " + fingerprint + " does not match expected " +
                                     *expected_fingerprint);
        }
        model.input_scale = header.at("input_scale").get<double>();
        model.seed = header.at("seed").get<std::uint64_t>();
        model.provenance = header.at("provenance");
        const auto& blocks = header.at("blocks");
        if (blocks.size() != 2 * arch.size()) throw FormatError("checkpoint: block count does not match architecture");
        std::size_t pos = 1;
        for (std::size_t l = 0; l < arch.size(); ++l) {
            model.layers.push_back(decode_layer(arch[l], std::to_string(l), blocks[2 * l], blocks[2 * l + 1], lines, pos));
        }
        if (pos != lines.size()) throw FormatError("checkpoint: trailing data after the last block");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: header field: ") + e.what());
    }
    return model;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_model(model));
}

MlpModel load_model(const std::filesystem::path& path, const std::optional<std::string>& expected_fingerprint) {
    return parse_model(read_file(path), expected_fingerprint);
}

}  // namespace sxfer::nn
