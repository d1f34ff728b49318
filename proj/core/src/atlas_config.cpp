#include "cimllm/atlas_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cimllm/error.hpp"

namespace cimllm {

using nlohmann::json;

std::string AtlasSpec::region_name(int label) const {
  const auto it = regions.find(label);
  return it != regions.end() ? it->second : "label_" + std::to_string(label);
}

const AtlasSpec* AtlasConfig::find(std::string_view name) const noexcept {
  for (const auto& a : atlases) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

bool AtlasConfig::defines_deep_gray() const noexcept {
  for (const auto& a : atlases) {
    if (!a.deep_gray.empty()) return true;
  }
  return false;
}

bool AtlasConfig::defines_frontal() const noexcept {
  for (const auto& a : atlases) {
    if (!a.frontal_left.empty() || !a.frontal_right.empty() || !a.frontal.empty()) return true;
  }
  return false;
}

std::vector<std::pair<std::string, std::filesystem::path>> AtlasConfig::image_sources() const {
  std::vector<std::pair<std::string, std::filesystem::path>> out;
  for (const auto& a : atlases) {
    if (a.image) out.emplace_back(a.name, *a.image);
  }
  return out;
}

namespace {

std::set<int> id_set(const json& obj, const char* key) {
  std::set<int> out;
  if (!obj.contains(key)) return out;
  const auto& arr = obj.at(key);
  if (!arr.is_array()) throw Error(ErrorCode::ConfigFormat, std::string(key) + " must be an array of label ids");
  for (const auto& v : arr) {
    if (!v.is_number_integer()) throw Error(ErrorCode::ConfigFormat, std::string(key) + " holds a non-integer id");
    out.insert(v.get<int>());
  }
  return out;
}

}  // namespace

AtlasConfig parse_atlas_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigFormat, e.what());
  }
  if (!doc.is_object() || !doc.contains("atlases") || !doc["atlases"].is_object()) {
    throw Error(ErrorCode::ConfigFormat, "atlas config needs an \"atlases\" object");
  }
  AtlasConfig cfg;
  cfg.version = doc.value("version", "unversioned");
  static const std::set<std::string> allowed = {"image", "regions", "eloquent", "deep_gray",
                                                "frontal_left", "frontal_right", "frontal"};
  for (const auto& [name, body] : doc["atlases"].items()) {
    if (!body.is_object()) throw Error(ErrorCode::ConfigFormat, "atlas " + name + " must be an object");
    for (const auto& [key, _] : body.items()) {
      if (!allowed.count(key)) throw Error(ErrorCode::ConfigFormat, "unknown key '" + key + "' in atlas " + name);
    }
    AtlasSpec spec;
    spec.name = name;
    if (body.contains("image")) {
      std::filesystem::path p = body["image"].get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      spec.image = p;
    }
    if (body.contains("regions")) {
      for (const auto& [id, region] : body["regions"].items()) {
        try {
          spec.regions[std::stoi(id)] = region.get<std::string>();
        } catch (const std::exception&) {
          throw Error(ErrorCode::ConfigFormat, "bad region entry '" + id + "' in atlas " + name);
        }
      }
    }
    spec.eloquent = id_set(body, "eloquent");
    spec.deep_gray = id_set(body, "deep_gray");
    spec.frontal_left = id_set(body, "frontal_left");
    spec.frontal_right = id_set(body, "frontal_right");
    spec.frontal = id_set(body, "frontal");
    cfg.atlases.push_back(std::move(spec));
  }
  return cfg;
}

AtlasConfig load_atlas_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open atlas config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_atlas_config(ss.str(), path.parent_path());
}

std::string format_atlas_config(const AtlasConfig& config) {
  json atlases = json::object();
  for (const auto& a : config.atlases) {
    json body = json::object();
    if (a.image) body["image"] = a.image->string();
    json regions = json::object();
    for (const auto& [id, name] : a.regions) regions[std::to_string(id)] = name;
    body["regions"] = regions;
    auto put = [&](const char* key, const std::set<int>& ids) {
      if (!ids.empty()) body[key] = std::vector<int>(ids.begin(), ids.end());
    };
    put("eloquent", a.eloquent);
    put("deep_gray", a.deep_gray);
    put("frontal_left", a.frontal_left);
    put("frontal_right", a.frontal_right);
    put("frontal", a.frontal);
    atlases[a.name] = body;
  }
  return json{{"version", config.version}, {"atlases", atlases}}.dump(2) + "\n";
}

}  // namespace cimllm
