#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace asetrap::io {

struct InputDigest {
  std::string path;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

/// Everything needed to reproduce a run: feeding the manifest back through
/// `--config` regenerates identical outputs.
struct RunManifest {
  std::string command;
  nlohmann::json parameters = nlohmann::json::object();
  std::uint64_t master_seed = 0;
  std::vector<InputDigest> inputs;

  nlohmann::json to_json() const;
};

std::string tool_version();

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

InputDigest digest_input(const std::filesystem::path& path);

}  // namespace asetrap::io
