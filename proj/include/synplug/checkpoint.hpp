#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "synplug/tape.hpp"
#include "synplug/vocab.hpp"

namespace synplug {

// Checkpoints are JSON documents with a magic string and version, parameter
// entries as {name, shape, trainable, data} where data is base64 of the
// little-endian 64-bit float payload, plus model-specific header fields.

inline constexpr const char* kCheckpointMagic = "synplug-ckpt";
inline constexpr int kCheckpointVersion = 1;

std::string base64_encode(const unsigned char* data, std::size_t n);
std::vector<unsigned char> base64_decode(const std::string& text);

nlohmann::json params_to_json(const std::vector<ad::Parameter*>& params);
// Restores values/flags into the given parameters; names and shapes must
// match exactly.
void params_from_json(const nlohmann::json& j, const std::vector<ad::Parameter*>& params);

nlohmann::json vocab_to_json(const Vocab& v);
Vocab vocab_from_json(const nlohmann::json& j);

// Wraps `body` with magic/version/model_type and writes it.
void save_checkpoint(const std::filesystem::path& path, const std::string& model_type,
                     nlohmann::json body);
// Verifies magic/version/model_type and returns the body.
nlohmann::json load_checkpoint(const std::filesystem::path& path, const std::string& model_type);

// Hex form of params_hash, as stored in fused checkpoints.
std::string hash_hex(std::uint64_t h);

}  // namespace synplug
