#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "subject_context.hpp"

namespace cimllm::detail {

namespace {

bool has_face_neighbor_in(const BinaryMask& target, std::size_t flat) {
  const Geometry& g = target.geometry();
  const auto [i, j, k] = g.coords(flat);
  const auto& d = g.dims;
  return (i > 0 && target.at(i - 1, j, k)) || (i + 1 < d[0] && target.at(i + 1, j, k)) ||
         (j > 0 && target.at(i, j - 1, k)) || (j + 1 < d[1] && target.at(i, j + 1, k)) ||
         (k > 0 && target.at(i, j, k - 1)) || (k + 1 < d[2] && target.at(i, j, k + 1));
}

double tc_hollowness(const BinaryMask& tc, const BinaryMask& et, std::size_t n_tc) {
  const Box box = tc.bounding_box(1);
  const BinaryMask et_local = et.crop(box);
  const BinaryMask core_local = tc.crop(box).minus(et_local);
  const BinaryMask reachable = voxel::reachable_from_border(et_local.complement());
  const std::size_t enclosed = core_local.minus(reachable).count();
  return static_cast<double>(enclosed) / static_cast<double>(n_tc);
}

std::optional<double> rim_thickness(const BinaryMask& et) {
  const Box box = et.bounding_box(1);
  const BinaryMask local = et.crop(box);
  const BinaryMask outside = local.complement();
  if (outside.empty()) return std::nullopt;
  const auto d = voxel::edt(outside);
  const auto& s = local.geometry().spacing;
  // Distances are measured centre to centre; the voxel surface lies half a
  // voxel closer.
  const double half = 0.5 * std::min({s[0], s[1], s[2]});
  std::vector<double> widths;
  for (std::size_t v = 0; v < local.size(); ++v) {
    if (local[v]) widths.push_back(2.0 * (d.mm[v] - half));
  }
  return median(std::move(widths));
}

std::size_t components(const BinaryMask& m, std::size_t min_voxels) {
  if (m.empty()) return 0;
  return voxel::count_components(m.crop(m.bounding_box(0)), voxel::Connectivity::TwentySix, min_voxels);
}

std::optional<double> sharpness(const BinaryMask& region, const VoxelGrid& sequence, std::optional<double> ref) {
  if (!ref || region.empty()) return std::nullopt;
  const BinaryMask edge = voxel::boundary(region, voxel::Connectivity::Six);
  const Geometry& g = region.geometry();
  std::vector<double> grads;
  for (std::size_t v = 0; v < edge.size(); ++v) {
    if (!edge[v]) continue;
    const auto [i, j, k] = g.coords(v);
    grads.push_back(voxel::gradient_magnitude_at(sequence, i, j, k));
  }
  return median(std::move(grads)) / *ref;
}

double trilinear(const VoxelGrid& grid, const Vec3& p) {
  const auto& d = grid.dims();
  std::array<std::size_t, 3> i0{};
  std::array<double, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    const double x = std::clamp(p[a], 0.0, static_cast<double>(d[a] - 1));
    const double fl = std::floor(x);
    i0[a] = static_cast<std::size_t>(fl);
    frac[a] = x - fl;
    if (i0[a] + 1 >= d[a]) {
      i0[a] = d[a] > 1 ? d[a] - 2 : 0;
      frac[a] = d[a] > 1 ? 1.0 : 0.0;
    }
  }
  double acc = 0.0;
  for (int c = 0; c < 8; ++c) {
    const std::size_t di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
    const double w = (di ? frac[0] : 1 - frac[0]) * (dj ? frac[1] : 1 - frac[1]) * (dk ? frac[2] : 1 - frac[2]);
    if (w == 0.0) continue;
    acc += w * grid.at(std::min(i0[0] + di, d[0] - 1), std::min(i0[1] + dj, d[1] - 1), std::min(i0[2] + dk, d[2] - 1));
  }
  return acc;
}

/// Position (mm along the ray) where the profile first falls to `level` at or
/// after sample `from`; linear interpolation between samples.
std::optional<std::pair<double, std::size_t>> crossing(const std::vector<double>& profile, double step,
                                                       double level, std::size_t from) {
  for (std::size_t s = from; s < profile.size(); ++s) {
    if (profile[s] > level) continue;
    if (s == 0) return std::make_pair(0.0, s);
    const double a = profile[s - 1];
    const double b = profile[s];
    const double t = a > b ? (a - level) / (a - b) : 0.0;
    return std::make_pair((static_cast<double>(s - 1) + std::clamp(t, 0.0, 1.0)) * step, s);
  }
  return std::nullopt;
}

std::optional<double> transition_zone(SubjectContext& ctx, const VoxelGrid& flair) {
  const auto& p = ctx.params();
  const BinaryMask& tc = ctx.tc();
  const BinaryMask& ed = ctx.ed();
  std::vector<double> tc_values, ed_values;
  for (std::size_t v = 0; v < tc.size(); ++v) {
    if (tc[v]) tc_values.push_back(flair[v]);
    if (ed[v]) ed_values.push_back(flair[v]);
  }
  if (tc_values.empty() || ed_values.empty()) return std::nullopt;
  const double level_tc = median(std::move(tc_values));
  const double level_ed = median(std::move(ed_values));
  const double span = level_tc - level_ed;
  if (std::abs(span) <= 1e-9 * std::max(1.0, std::abs(level_tc))) return std::nullopt;

  std::vector<std::size_t> seeds = ctx.tc_boundary().indices();
  if (seeds.size() > p.max_transition_rays) {
    std::mt19937_64 rng(p.seed);
    for (std::size_t i = 0; i < p.max_transition_rays; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (seeds.size() - i));
      std::swap(seeds[i], seeds[j]);
    }
    seeds.resize(p.max_transition_rays);
    std::sort(seeds.begin(), seeds.end());
  }

  // Outward direction from the gradient of the distance-to-TC field.
  const Geometry& g = ctx.geometry();
  const Box box = tc.bounding_box(2);
  const auto outside = voxel::edt(tc.crop(box));
  const Geometry& lg = outside.geometry;
  const auto& s = g.spacing;
  const auto steps = static_cast<std::size_t>(std::floor(p.ray_max_mm / p.ray_step_mm));

  std::vector<double> zones;
  std::vector<double> profile;
  for (std::size_t seed : seeds) {
    const auto c = g.coords(seed);
    const Index3 lc{c[0] - box.lo[0], c[1] - box.lo[1], c[2] - box.lo[2]};
    Vec3 grad{};
    double norm = 0.0;
    for (int a = 0; a < 3; ++a) {
      Index3 lo = lc, hi = lc;
      double span_vox = 2.0;
      if (lc[a] == 0) {
        span_vox = 1.0;
      } else {
        lo[a] = lc[a] - 1;
      }
      if (lc[a] + 1 >= lg.dims[a]) {
        span_vox -= 1.0;
      } else {
        hi[a] = lc[a] + 1;
      }
      if (span_vox <= 0.0) continue;
      grad[a] = (outside.mm[lg.index(hi[0], hi[1], hi[2])] - outside.mm[lg.index(lo[0], lo[1], lo[2])]) /
                (span_vox * s[a]);
      norm += grad[a] * grad[a];
    }
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) continue;

    profile.clear();
    for (std::size_t n = 0; n <= steps; ++n) {
      const double t = static_cast<double>(n) * p.ray_step_mm;
      Vec3 pos{};
      bool inside = true;
      for (int a = 0; a < 3; ++a) {
        pos[a] = static_cast<double>(c[a]) + t * grad[a] / norm / s[a];
        if (pos[a] < 0.0 || pos[a] > static_cast<double>(g.dims[a] - 1)) inside = false;
      }
      if (!inside) break;
      profile.push_back((trilinear(flair, pos) - level_ed) / span);
    }
    const auto upper = crossing(profile, p.ray_step_mm, p.transition_upper, 0);
    if (!upper) continue;
    const auto lower = crossing(profile, p.ray_step_mm, p.transition_lower, upper->second);
    if (!lower) continue;
    zones.push_back(std::max(0.0, lower->first - upper->first));
  }
  if (zones.empty()) return std::nullopt;
  return median(std::move(zones));
}

}  // namespace

MorphologyFeatures morphology_features(SubjectContext& ctx) {
  MorphologyFeatures f;
  const SubjectBundle& b = ctx.bundle();
  const auto& p = ctx.params();
  const BinaryMask& tc = ctx.tc();
  const BinaryMask& wt = ctx.wt();
  const BinaryMask& et = ctx.et();
  const BinaryMask& net = ctx.net();
  const std::size_t n_tc = tc.count();
  const std::size_t n_et = et.count();
  const std::size_t n_net = net.count();

  if (n_tc > 0) f.tc_hollowness = tc_hollowness(tc, et, n_tc);

  if (n_net > 0) {
    const BinaryMask edge = voxel::boundary(net, voxel::Connectivity::Six);
    std::size_t touching = 0, total = 0;
    for (std::size_t v = 0; v < edge.size(); ++v) {
      if (!edge[v]) continue;
      ++total;
      if (has_face_neighbor_in(et, v)) ++touching;
    }
    f.rim_core_adjacency = static_cast<double>(touching) / static_cast<double>(total);
  }

  if (n_et > 0) {
    f.enhancing_rim_thickness_mm = rim_thickness(et);
    std::size_t isolated = 0;
    for (std::size_t v = 0; v < et.size(); ++v) {
      if (et[v] && !has_face_neighbor_in(net, v)) ++isolated;
    }
    f.non_rim_enhancement_fraction = static_cast<double>(isolated) / static_cast<double>(n_et);
  }

  f.et_component_count = static_cast<std::int64_t>(components(et, p.min_component_voxels));
  f.net_component_count = static_cast<std::int64_t>(components(net, p.min_component_voxels));

  if (!wt.empty()) f.sphericity_wt = voxel::sphericity(wt.crop(wt.bounding_box(1)));
  if (n_tc > 0) f.sphericity_tc = voxel::sphericity(tc.crop(tc.bounding_box(1)));

  if (b.flair) f.boundary_sharpness_wt = sharpness(wt, *b.flair, ctx.cnwm_reference(*b.flair));
  if (b.t1ce) f.boundary_sharpness_tc = sharpness(tc, *b.t1ce, ctx.cnwm_reference(*b.t1ce));

  if (b.flair && n_tc > 0) f.transition_zone_thickness_mm = transition_zone(ctx, *b.flair);
  return f;
}

}  // namespace cimllm::detail
