#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "cimllm/error.hpp"
#include "subject_context.hpp"

namespace cimllm::detail {

namespace {

struct RegionTally {
  std::size_t total = 0;
  std::size_t in_tc = 0;
  std::size_t in_ed = 0;
};

std::map<std::string, RegionOverlap> overlaps(const std::map<int, RegionTally>& tally, const AtlasSpec* spec,
                                              std::size_t region_size, bool edema) {
  // Distinct labels may share a display name; they are merged.
  std::map<std::string, std::pair<std::size_t, std::size_t>> by_name;  // (hit, total)
  for (const auto& [label, t] : tally) {
    const std::size_t hit = edema ? t.in_ed : t.in_tc;
    if (hit == 0) continue;
    auto& acc = by_name[spec ? spec->region_name(label) : "label_" + std::to_string(label)];
    acc.first += hit;
    acc.second += t.total;
  }
  std::map<std::string, RegionOverlap> out;
  for (const auto& [name, acc] : by_name) {
    out[name] = {static_cast<double>(acc.first) / static_cast<double>(region_size),
                 static_cast<double>(acc.first) / static_cast<double>(acc.second)};
  }
  return out;
}

}  // namespace

LocationFeatures location_features(SubjectContext& ctx, const AtlasConfig& config) {
  const SubjectBundle& b = ctx.bundle();
  if (b.atlases.empty()) throw Error(ErrorCode::NoAtlas, "no atlas label maps in bundle");
  const BinaryMask& tc = ctx.tc();
  const std::size_t n_tc = tc.count();
  if (n_tc == 0) throw Error(ErrorCode::EmptyTumorCore, "tumor core is empty");
  const BinaryMask& ed = ctx.ed();
  const std::size_t n_ed = ed.count();
  const Geometry& g = ctx.geometry();
  const auto& p = ctx.params();
  const auto& dist = ctx.tc_boundary_distance();

  LocationFeatures f;
  AtlasOverlap edema;
  std::unordered_map<std::string, double> nearest;  // eloquent region name -> mm
  std::vector<std::uint8_t> deep_gray(g.voxel_count(), 0);
  std::vector<std::uint8_t> frontal_side(g.voxel_count(), 0);  // bit 1 left, bit 2 right
  bool any_deep_gray = false;
  bool any_frontal = false;

  for (const auto& [name, atlas] : b.atlases) {
    const AtlasSpec* spec = config.find(name);
    if (spec && !spec->deep_gray.empty()) any_deep_gray = true;
    if (spec && (!spec->frontal_left.empty() || !spec->frontal_right.empty() || !spec->frontal.empty())) {
      any_frontal = true;
    }
    int max_label = 0;
    for (double x : atlas->data()) max_label = std::max(max_label, static_cast<int>(std::lround(x)));
    if (max_label > 1'000'000) throw Error(ErrorCode::ConfigFormat, "atlas " + name + " has label ids above 1e6");
    std::vector<RegionTally> counts(static_cast<std::size_t>(max_label) + 1);
    // Per-label role bits: 1 eloquent, 2 deep gray, 4 frontal left, 8 frontal right, 16 frontal (by side).
    std::vector<std::uint8_t> role(counts.size(), 0);
    if (spec) {
      auto mark = [&](const std::set<int>& ids, std::uint8_t bit) {
        for (int id : ids) {
          if (id > 0 && id <= max_label) role[static_cast<std::size_t>(id)] |= bit;
        }
      };
      mark(spec->eloquent, 1);
      mark(spec->deep_gray, 2);
      mark(spec->frontal_left, 4);
      mark(spec->frontal_right, 8);
      mark(spec->frontal, 16);
    }
    std::vector<double> eloquent_best(counts.size(), std::numeric_limits<double>::infinity());
    std::size_t v = 0;
    for (std::size_t k = 0; k < g.dims[2]; ++k) {
      for (std::size_t j = 0; j < g.dims[1]; ++j) {
        for (std::size_t i = 0; i < g.dims[0]; ++i, ++v) {
          const auto label = static_cast<int>(std::lround((*atlas)[v]));
          if (label <= 0) continue;
          const auto l = static_cast<std::size_t>(label);
          auto& t = counts[l];
          ++t.total;
          const bool in_tc = tc[v];
          if (in_tc) ++t.in_tc;
          if (ed[v]) ++t.in_ed;
          const std::uint8_t r = role[l];
          if (r == 0) continue;
          if ((r & 1) && dist[v] < eloquent_best[l]) eloquent_best[l] = dist[v];
          if (!in_tc) continue;
          if (r & 2) deep_gray[v] = 1;
          if (r & 4) frontal_side[v] |= 1;
          if (r & 8) frontal_side[v] |= 2;
          if (r & 16) {
            const double x = g.world(i, j, k)[0];
            if (x < 0.0) frontal_side[v] |= 1;
            if (x > 0.0) frontal_side[v] |= 2;
          }
        }
      }
    }
    std::map<int, RegionTally> tally;
    std::unordered_map<int, double> eloquent_min;
    for (std::size_t l = 1; l < counts.size(); ++l) {
      if (counts[l].total > 0) tally[static_cast<int>(l)] = counts[l];
      if (std::isfinite(eloquent_best[l])) eloquent_min[static_cast<int>(l)] = eloquent_best[l];
    }
    f.tumor_location[name] = overlaps(tally, spec, n_tc, false);
    if (n_ed > 0) edema[name] = overlaps(tally, spec, n_ed, true);
    for (const auto& [label, d] : eloquent_min) {
      const std::string rname = spec->region_name(label);
      auto [it, inserted] = nearest.try_emplace(rname, d);
      if (!inserted) it->second = std::min(it->second, d);
    }
  }

  for (const auto& [name, d] : nearest) f.eloquent_proximity.push_back({name, d});
  std::sort(f.eloquent_proximity.begin(), f.eloquent_proximity.end(), [](const auto& a, const auto& b) {
    return a.distance_mm != b.distance_mm ? a.distance_mm < b.distance_mm : a.region < b.region;
  });
  if (f.eloquent_proximity.size() > 5) f.eloquent_proximity.resize(5);

  if (any_deep_gray) {
    const auto n = static_cast<std::size_t>(std::count(deep_gray.begin(), deep_gray.end(), 1));
    f.deep_gray_involved = n >= p.involvement_min_voxels;
  }
  if (any_frontal) {
    std::size_t left = 0, right = 0;
    for (auto s : frontal_side) {
      left += (s & 1) ? 1 : 0;
      right += (s & 2) ? 1 : 0;
    }
    f.bilateral_frontal = left >= p.involvement_min_voxels && right >= p.involvement_min_voxels;
  }
  if (n_ed > 0) f.edema_location = std::move(edema);
  return f;
}

}  // namespace cimllm::detail
