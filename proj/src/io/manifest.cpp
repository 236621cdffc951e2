#include "asetrap/io/manifest.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "asetrap/error.hpp"
#include "asetrap/seeding.hpp"

namespace asetrap::io {

std::string tool_version() { return ASETRAP_VERSION; }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json inputs_json = nlohmann::json::array();
  for (const auto& in : inputs) {
    inputs_json.push_back({{"path", in.path}, {"sha256", in.sha256}, {"bytes", in.bytes}});
  }
  return {{"tool", "asetrap"},
          {"version", tool_version()},
          {"command", command},
          {"parameters", parameters},
          {"master_seed", master_seed},
          {"seed_derivation", std::string(kSeedDerivation)},
          {"rng", std::string(kRngName)},
          {"inputs", inputs_json}};
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 initialisation failed");
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    char pair[3];
    std::snprintf(pair, sizeof pair, "%02x", md[i]);
    hex += pair;
  }
  return hex;
}

InputDigest digest_input(const std::filesystem::path& path) {
  return {path.string(), sha256_file(path), std::filesystem::file_size(path)};
}

}  // namespace asetrap::io
