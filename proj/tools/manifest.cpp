// Copyright 2026 The segpark Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "manifest.hpp"

#include <openssl/evp.h>

#include <Eigen/Core>
#include <array>
#include <fstream>
#include <iterator>
#include <memory>

#include "segpark/errors.hpp"

#ifndef SEGPARK_VERSION
#define SEGPARK_VERSION "unknown"
#endif

namespace segpark::cli
{

std::string sha256_hex(std::string_view bytes)
{
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4U];
    out += kHex[digest[i] & 0xFU];
  }
  return out;
}

std::string file_sha256(const std::filesystem::path & path)
{
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("cannot read " + path.string());
  }
  const std::string bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  return sha256_hex(bytes);
}

nlohmann::json version_info()
{
  return {
    {"segpark", SEGPARK_VERSION},
    {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                std::to_string(EIGEN_MINOR_VERSION)},
    {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                        std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                        std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
    {"compiler", __VERSION__},
  };
}

nlohmann::json to_json(const Manifest & m)
{
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto & p : m.inputs) {
    inputs.push_back({{"path", p.generic_string()}, {"sha256", file_sha256(p)}});
  }
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto & p : m.outputs) {
    outputs.push_back({{"path", p.generic_string()}, {"sha256", file_sha256(p)}});
  }
  return {
    {"command", m.command},
    {"config", m.config},
    {"config_hash", sha256_hex(m.config.dump())},
    {"seed", m.seed},
    {"versions", version_info()},
    {"inputs", std::move(inputs)},
    {"outputs", std::move(outputs)},
  };
}

std::filesystem::path write_manifest(const Manifest & m)
{
  if (m.outputs.empty()) {
    throw Error("manifest needs at least one output");
  }
  std::filesystem::path path = m.outputs.front();
  path += ".manifest.json";
  write_text(path, to_json(m).dump(2) + "\n");
  return path;
}

void write_text(const std::filesystem::path & path, std::string_view text)
{
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw IoError("cannot open for writing: " + path.string());
  }
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) {
    throw IoError("failed writing " + path.string());
  }
}

}  // namespace segpark::cli
