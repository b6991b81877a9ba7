#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace navlab {

inline constexpr const char* kToolVersion = "0.3.0";

std::string build_id();
/// 16 hex digits of FNV-1a over the file's bytes.
std::string file_hash(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

/// manifest.json in an output directory. write() is called once with status
/// "running" before work starts and again with the final status.
class RunManifest {
 public:
  RunManifest(std::filesystem::path out_dir, std::string command);
  ~RunManifest();

  void set_config(std::uint64_t config_hash, const std::string& effective_config_file);
  void set_seeds(const std::vector<std::uint64_t>& seeds);
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void note(const std::string& key, const std::string& value);
  void note(const std::string& key, double value);

  void write(const std::string& status);
  const std::filesystem::path& path() const { return path_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::filesystem::path dir_;
  std::filesystem::path path_;
};

}  // namespace navlab
