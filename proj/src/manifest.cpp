#include "navlab/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "navlab/error.hpp"
#include "navlab/rng.hpp"

#ifndef NAVLAB_BUILD_ID
#define NAVLAB_BUILD_ID "unknown"
#endif

namespace navlab {

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string build_id() { return NAVLAB_BUILD_ID; }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(fnv1a64(bytes));
}

struct RunManifest::Impl {
  nlohmann::ordered_json doc;
};

RunManifest::RunManifest(std::filesystem::path out_dir, std::string command)
    : impl_(std::make_unique<Impl>()), dir_(std::move(out_dir)), path_(dir_ / "manifest.json") {
  auto& d = impl_->doc;
  d["tool"] = "navlab";
  d["version"] = kToolVersion;
  d["build"] = build_id();
  d["command"] = std::move(command);
  d["started"] = utc_now();
  d["finished"] = nullptr;
  d["status"] = "created";
  d["config_hash"] = nullptr;
  d["seeds"] = nlohmann::json::array();
  d["inputs"] = nlohmann::ordered_json::object();
  d["outputs"] = nlohmann::ordered_json::object();
  d["notes"] = nlohmann::ordered_json::object();
}

RunManifest::~RunManifest() = default;

void RunManifest::set_config(std::uint64_t config_hash, const std::string& effective_config_file) {
  impl_->doc["config_hash"] = hex64(config_hash);
  impl_->doc["effective_config"] = effective_config_file;
}

void RunManifest::set_seeds(const std::vector<std::uint64_t>& seeds) { impl_->doc["seeds"] = seeds; }

void RunManifest::add_input(const std::filesystem::path& path) {
  impl_->doc["inputs"][path.string()] = file_hash(path);
}

void RunManifest::add_output(const std::filesystem::path& path) {
  std::error_code ec;
  const auto rel = std::filesystem::relative(path, dir_, ec);
  impl_->doc["outputs"][(ec || rel.empty()) ? path.string() : rel.string()] = file_hash(path);
}

void RunManifest::note(const std::string& key, const std::string& value) { impl_->doc["notes"][key] = value; }
void RunManifest::note(const std::string& key, double value) { impl_->doc["notes"][key] = value; }

void RunManifest::write(const std::string& status) {
  auto& d = impl_->doc;
  d["status"] = status;
  if (status != "running") d["finished"] = utc_now();
  std::filesystem::create_directories(dir_);
  const auto tmp = path_.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write " + tmp);
    out << d.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path_);
}

}  // namespace navlab
