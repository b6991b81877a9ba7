#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "navlab/numerics.hpp"

namespace navlab {

/// Checkpoint file layout:
///   "TDNAV1"                6 bytes
///   u8  format version (1)
///   u32 header length, header text (UTF-8 lines):
///       meta <key> <value>             architecture / run metadata
///       branch <scene key>             one per scene-specific branch
///       block <name> <rows> <cols>     in payload order
///   payload: per block, weights then bias, little-endian float32.
inline constexpr char kCheckpointMagic[] = "TDNAV1";
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::string> branches;
  std::vector<ParamBlock> blocks;

  const ParamBlock* find(const std::string& name) const;
  /// Throws ValidationError if meta lacks the key.
  const std::string& require(const std::string& key) const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace navlab
