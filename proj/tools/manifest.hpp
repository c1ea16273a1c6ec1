#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "iontweez/errors.hpp"
#include "iontweez/io.hpp"

namespace iontweez::tools {

inline constexpr const char* kVersion = "0.1.0";

/// Hex SHA-256 of a file's bytes.
inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("manifest: cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw NumericalError("manifest: SHA-256 unavailable");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

/// Collects outputs of one run and writes manifest.json next to them.
class RunManifest {
 public:
  RunManifest(std::filesystem::path out_dir, std::string subcommand,
              std::map<std::string, std::string> config)
      : dir_(std::move(out_dir)),
        subcommand_(std::move(subcommand)),
        config_(std::move(config)),
        start_(std::chrono::steady_clock::now()) {
    std::filesystem::create_directories(dir_);
  }

  const std::filesystem::path& dir() const { return dir_; }

  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }

  void write(const std::string& name, const CsvTable& table) {
    table.write(dir_ / name);
    files_.push_back(name);
  }

  void finish() const {
    nlohmann::ordered_json j;
    j["tool"] = "iontweez";
    j["version"] = kVersion;
    j["subcommand"] = subcommand_;
    j["config"] = config_;
    j["seeds"] = seeds_;
    j["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
    for (const auto& f : files_) outputs.push_back({{"file", f}, {"sha256", sha256_file(dir_ / f)}});
    j["outputs"] = outputs;
    std::ofstream out(dir_ / "manifest.json");
    out << j.dump(2) << '\n';
  }

 private:
  std::filesystem::path dir_;
  std::string subcommand_;
  std::map<std::string, std::string> config_;
  std::map<std::string, std::uint64_t> seeds_;
  std::vector<std::string> files_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace iontweez::tools
