#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace cimllm {

/// Label inventory for one atlas. `frontal` lists frontal labels that are not
/// lateralised in the atlas; their hemisphere is taken from the sign of the
/// voxel's world x coordinate (RAS: x < 0 is left).
struct AtlasSpec {
  std::string name;
  std::optional<std::filesystem::path> image;
  std::map<int, std::string> regions;
  std::set<int> eloquent;
  std::set<int> deep_gray;
  std::set<int> frontal_left;
  std::set<int> frontal_right;
  std::set<int> frontal;

  [[nodiscard]] std::string region_name(int label) const;
};

struct AtlasConfig {
  std::string version;
  std::vector<AtlasSpec> atlases;

  [[nodiscard]] const AtlasSpec* find(std::string_view name) const noexcept;
  [[nodiscard]] bool defines_deep_gray() const noexcept;
  [[nodiscard]] bool defines_frontal() const noexcept;
  /// (name, image path) for every atlas with an image, for load_atlases().
  [[nodiscard]] std::vector<std::pair<std::string, std::filesystem::path>> image_sources() const;
};

/// Parses the declarative JSON config. Relative image paths resolve against
/// `base_dir`. Throws Error(ConfigFormat).
AtlasConfig parse_atlas_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
AtlasConfig load_atlas_config(const std::filesystem::path& path);
std::string format_atlas_config(const AtlasConfig& config);

}  // namespace cimllm
