#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "navlab/gridworld.hpp"

namespace navlab {

/// Scene file layout (all integers little-endian):
///   "NAVSCN1"                      7 bytes
///   u8  format version (1)
///   u32 id length, id bytes
///   u32 width, u32 height
///   u64 generation seed, u64 feature seed
///   f64 obstacle density, f64 smoothing
///   u32 percept_dim
///   u32 target count, then per target: u32 x, u32 y, u8 heading
///   obstacle bitmap, row-major, LSB-first, ceil(w*h/8) bytes
/// Perception features are regenerated from the feature seed on load.
inline constexpr char kSceneMagic[] = "NAVSCN1";
inline constexpr std::uint8_t kSceneFormatVersion = 1;

void write_scene(std::ostream& out, const Scene& scene);
Scene read_scene(std::istream& in);

void save_scene(const std::filesystem::path& path, const Scene& scene);
Scene load_scene(const std::filesystem::path& path);

/// All *.navscn files in a directory, sorted by file name.
std::vector<Scene> load_scene_dir(const std::filesystem::path& dir);

}  // namespace navlab
