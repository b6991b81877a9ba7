#include "navlab/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "navlab/binio.hpp"

namespace navlab {
namespace {

bool has_space(const std::string& s) { return s.empty() || s.find_first_of(" \t\r\n") != std::string::npos; }

}  // namespace

const ParamBlock* Checkpoint::find(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

const std::string& Checkpoint::require(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw ValidationError("checkpoint header lacks '" + key + "'");
  return it->second;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  std::ostringstream header;
  for (const auto& [k, v] : ckpt.meta) {
    if (has_space(k) || v.find('\n') != std::string::npos) throw Error("bad checkpoint meta entry " + k);
    header << "meta " << k << ' ' << v << '\n';
  }
  for (const auto& b : ckpt.branches) {
    if (has_space(b)) throw Error("bad branch key");
    header << "branch " << b << '\n';
  }
  for (const auto& b : ckpt.blocks) {
    if (has_space(b.name)) throw Error("bad block name");
    header << "block " << b.name << ' ' << b.rows << ' ' << b.cols << '\n';
  }
  const std::string text = header.str();
  out.write(kCheckpointMagic, 6);
  binio::put<std::uint8_t>(out, kCheckpointVersion);
  binio::put_string(out, text);
  for (const auto& b : ckpt.blocks) {
    for (float w : b.weights) binio::put<float>(out, w);
    for (float w : b.bias) binio::put<float>(out, w);
  }
  if (!out) throw Error("failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[6];
  if (!in.read(magic, 6) || std::string(magic, 6) != kCheckpointMagic) {
    throw ValidationError("not a checkpoint file (bad magic)");
  }
  const auto version = binio::get<std::uint8_t>(in);
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::string text = binio::get_string(in, 1u << 24);
  Checkpoint ckpt;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream fields(line);
    std::string kind;
    fields >> kind;
    if (kind == "meta") {
      std::string key;
      fields >> key;
      std::string value;
      std::getline(fields, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ckpt.meta[key] = value;
    } else if (kind == "branch") {
      std::string key;
      fields >> key;
      ckpt.branches.push_back(key);
    } else if (kind == "block") {
      std::string name;
      std::size_t rows = 0, cols = 0;
      if (!(fields >> name >> rows >> cols) || rows == 0 || cols == 0 || rows * cols > (1u << 26)) {
        throw ValidationError("malformed checkpoint block entry: " + line);
      }
      ckpt.blocks.emplace_back(name, rows, cols);
    } else if (!kind.empty()) {
      throw ValidationError("unknown checkpoint header entry: " + kind);
    }
  }
  for (auto& b : ckpt.blocks) {
    for (float& w : b.weights) w = binio::get<float>(in);
    for (float& w : b.bias) w = binio::get<float>(in);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace navlab
