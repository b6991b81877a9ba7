#include "navlab/scene_io.hpp"

#include <algorithm>
#include <fstream>

#include "navlab/binio.hpp"
#include "navlab/error.hpp"

namespace navlab {

void write_scene(std::ostream& out, const Scene& scene) {
  out.write(kSceneMagic, 7);
  binio::put<std::uint8_t>(out, kSceneFormatVersion);
  binio::put_string(out, scene.id());
  binio::put<std::uint32_t>(out, scene.width());
  binio::put<std::uint32_t>(out, scene.height());
  binio::put<std::uint64_t>(out, scene.generation_seed());
  binio::put<std::uint64_t>(out, scene.feature_seed());
  binio::put<double>(out, scene.obstacle_density());
  binio::put<double>(out, scene.smoothing());
  binio::put<std::uint32_t>(out, scene.percept_dim());
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(scene.targets().size()));
  for (const Pose& t : scene.targets()) {
    binio::put<std::uint32_t>(out, t.x);
    binio::put<std::uint32_t>(out, t.y);
    binio::put<std::uint8_t>(out, static_cast<std::uint8_t>(t.heading));
  }
  const auto& mask = scene.obstacle_mask();
  std::vector<std::uint8_t> bits((mask.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  out.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  if (!out) throw Error("failed to write scene");
}

Scene read_scene(std::istream& in) {
  char magic[7];
  if (!in.read(magic, 7) || std::string(magic, 7) != kSceneMagic) {
    throw ValidationError("not a scene file (bad magic)");
  }
  const auto version = binio::get<std::uint8_t>(in);
  if (version != kSceneFormatVersion) {
    throw ValidationError("unsupported scene format version " + std::to_string(version));
  }
  std::string id = binio::get_string(in, 4096);
  const auto width = binio::get<std::uint32_t>(in);
  const auto height = binio::get<std::uint32_t>(in);
  if (width == 0 || height == 0 || width > 4096 || height > 4096) {
    throw ValidationError("scene dimensions out of range");
  }
  const auto gen_seed = binio::get<std::uint64_t>(in);
  const auto feature_seed = binio::get<std::uint64_t>(in);
  const auto density = binio::get<double>(in);
  const auto smoothing = binio::get<double>(in);
  const auto dim = binio::get<std::uint32_t>(in);
  if (dim == 0 || dim > 65536) throw ValidationError("percept_dim out of range");
  const auto n_targets = binio::get<std::uint32_t>(in);
  if (n_targets > width * height * 4) throw ValidationError("target count out of range");
  std::vector<Pose> targets;
  for (std::uint32_t i = 0; i < n_targets; ++i) {
    Pose p;
    p.x = static_cast<int>(binio::get<std::uint32_t>(in));
    p.y = static_cast<int>(binio::get<std::uint32_t>(in));
    const auto h = binio::get<std::uint8_t>(in);
    if (h >= kNumHeadings) throw ValidationError("bad heading in target list");
    p.heading = static_cast<Heading>(h);
    targets.push_back(p);
  }
  const std::size_t cells = static_cast<std::size_t>(width) * height;
  std::vector<std::uint8_t> bits((cells + 7) / 8);
  if (!in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()))) {
    throw ValidationError("truncated obstacle bitmap");
  }
  std::vector<std::uint8_t> mask(cells);
  for (std::size_t i = 0; i < cells; ++i) mask[i] = (bits[i / 8] >> (i % 8)) & 1u;
  return Scene(std::move(id), static_cast<int>(width), static_cast<int>(height), std::move(mask),
               smoothing, static_cast<int>(dim), feature_seed, std::move(targets), gen_seed, density);
}

void save_scene(const std::filesystem::path& path, const Scene& scene) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_scene(out, scene);
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open scene file " + path.string());
  try {
    return read_scene(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<Scene> load_scene_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError("scene directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".navscn") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no .navscn files in " + dir.string());
  std::vector<Scene> scenes;
  for (const auto& f : files) scenes.push_back(load_scene(f));
  return scenes;
}

}  // namespace navlab
