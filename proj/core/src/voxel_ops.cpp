#include "cimllm/voxel_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cimllm/error.hpp"

namespace cimllm::voxel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Squared distance of a 1D index gap in mm², always formed as (gap*s)*(gap*s)
/// so that every pass and the brute-force oracle round identically.
inline double gap_sq(double gap, double s) noexcept {
  const double t = gap * s;
  return t * t;
}

/// First pass on a binary row: nearest source along the row.
void nearest_source_1d(const std::uint8_t* src, std::size_t stride, std::size_t n, double s, double* out) {
  long long last = -1;
  for (std::size_t q = 0; q < n; ++q) {
    if (src[q * stride]) last = static_cast<long long>(q);
    out[q] = last < 0 ? kInf : gap_sq(static_cast<double>(static_cast<long long>(q) - last), s);
  }
  last = -1;
  for (std::size_t qq = n; qq-- > 0;) {
    if (src[qq * stride]) last = static_cast<long long>(qq);
    if (last >= 0) {
      const double d = gap_sq(static_cast<double>(last - static_cast<long long>(qq)), s);
      if (d < out[qq]) out[qq] = d;
    }
  }
}

/// Lower envelope of parabolas f[p] + ((q-p)*s)^2 over the finite samples of f.
/// `v`/`z` are scratch buffers of size n and n+1.
void envelope_1d(const double* f, std::size_t n, double s, double* out, std::vector<std::size_t>& v,
                 std::vector<double>& z) {
  const double w = s * s;
  std::size_t first = 0;
  while (first < n && !std::isfinite(f[first])) ++first;
  if (first == n) {
    for (std::size_t q = 0; q < n; ++q) out[q] = kInf;
    return;
  }
  std::size_t k = 0;
  v[0] = first;
  z[0] = -kInf;
  z[1] = kInf;
  for (std::size_t q = first + 1; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    const double fq = f[q] + w * static_cast<double>(q) * static_cast<double>(q);
    double sect;
    for (;;) {
      const double p = static_cast<double>(v[k]);
      const double fp = f[v[k]] + w * p * p;
      sect = (fq - fp) / (2.0 * w * (static_cast<double>(q) - p));
      if (sect <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (sect <= z[k]) {
      // k == 0 and the new parabola dominates everywhere
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = sect;
    z[k + 1] = kInf;
  }
  std::size_t j = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const double qd = static_cast<double>(q);
    while (z[j + 1] < qd) ++j;
    auto eval = [&](std::size_t idx) {
      const double gap = qd - static_cast<double>(v[idx]);
      return f[v[idx]] + gap_sq(gap, s);
    };
    // The intersection abscissae are rounded; neighbouring parabolas may tie
    // within an ulp, so take the true minimum of the three candidates.
    double best = eval(j);
    if (j > 0) best = std::min(best, eval(j - 1));
    if (j < k) best = std::min(best, eval(j + 1));
    out[q] = best;
  }
}

}  // namespace

std::vector<double> squared_edt(const BinaryMask& source) {
  const Geometry& g = source.geometry();
  const auto [nx, ny, nz] = g.dims;
  const auto bits = source.bits();
  if (std::find(bits.begin(), bits.end(), 1) == bits.end()) {
    throw Error(ErrorCode::EmptySource, "distance transform of an empty source set");
  }
  std::vector<double> d(g.voxel_count());

  for (std::size_t k = 0; k < nz; ++k) {
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t base = g.index(0, j, k);
      nearest_source_1d(bits.data() + base, 1, nx, g.spacing[0], d.data() + base);
    }
  }

  const std::size_t longest = std::max({nx, ny, nz});
  std::vector<double> line(longest), result(longest), z(longest + 1);
  std::vector<std::size_t> v(longest);

  if (ny > 1) {
    for (std::size_t k = 0; k < nz; ++k) {
      for (std::size_t i = 0; i < nx; ++i) {
        const std::size_t base = g.index(i, 0, k);
        for (std::size_t j = 0; j < ny; ++j) line[j] = d[base + j * nx];
        envelope_1d(line.data(), ny, g.spacing[1], result.data(), v, z);
        for (std::size_t j = 0; j < ny; ++j) d[base + j * nx] = result[j];
      }
    }
  }
  if (nz > 1) {
    const std::size_t stride = nx * ny;
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        const std::size_t base = g.index(i, j, 0);
        for (std::size_t k = 0; k < nz; ++k) line[k] = d[base + k * stride];
        envelope_1d(line.data(), nz, g.spacing[2], result.data(), v, z);
        for (std::size_t k = 0; k < nz; ++k) d[base + k * stride] = result[k];
      }
    }
  }
  return d;
}

DistanceField edt(const BinaryMask& source) {
  DistanceField out{source.geometry(), squared_edt(source)};
  for (auto& x : out.mm) x = std::sqrt(x);
  return out;
}

namespace {

struct NeighborOffsets {
  std::vector<std::array<int, 3>> steps;
};

const NeighborOffsets& offsets(Connectivity c) {
  static const NeighborOffsets six{{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};
  static const NeighborOffsets twenty_six = [] {
    NeighborOffsets n;
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx || dy || dz) n.steps.push_back({dx, dy, dz});
        }
      }
    }
    return n;
  }();
  return c == Connectivity::Six ? six : twenty_six;
}

/// Calls fn(neighbor_flat) for in-grid neighbours; returns false if any
/// neighbour falls outside the grid.
template <typename Fn>
bool for_each_neighbor(const Geometry& g, std::size_t flat, Connectivity c, Fn&& fn) {
  const auto [i, j, k] = g.coords(flat);
  bool all_inside = true;
  for (const auto& s : offsets(c).steps) {
    const long long ni = static_cast<long long>(i) + s[0];
    const long long nj = static_cast<long long>(j) + s[1];
    const long long nk = static_cast<long long>(k) + s[2];
    if (ni < 0 || nj < 0 || nk < 0 || ni >= static_cast<long long>(g.dims[0]) ||
        nj >= static_cast<long long>(g.dims[1]) || nk >= static_cast<long long>(g.dims[2])) {
      all_inside = false;
      continue;
    }
    fn(g.index(static_cast<std::size_t>(ni), static_cast<std::size_t>(nj), static_cast<std::size_t>(nk)));
  }
  return all_inside;
}

}  // namespace

ComponentLabels label_components(const BinaryMask& mask, Connectivity connectivity) {
  const Geometry& g = mask.geometry();
  const std::size_t n = g.voxel_count();
  std::vector<std::uint32_t> raw(n, 0);
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> stack;
  std::uint32_t next = 0;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!mask[seed] || raw[seed]) continue;
    ++next;
    std::size_t size = 0;
    raw[seed] = next;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      ++size;
      for_each_neighbor(g, cur, connectivity, [&](std::size_t nb) {
        if (mask[nb] && !raw[nb]) {
          raw[nb] = next;
          stack.push_back(nb);
        }
      });
    }
    sizes.push_back(size);
  }

  // Relabel by descending size; stable sort keeps scan order for ties.
  std::vector<std::uint32_t> order(sizes.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sizes[a] > sizes[b]; });
  std::vector<std::uint32_t> remap(sizes.size() + 1, 0);
  ComponentLabels out;
  out.sizes.resize(sizes.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    remap[order[r] + 1] = static_cast<std::uint32_t>(r + 1);
    out.sizes[r] = sizes[order[r]];
  }
  for (auto& l : raw) l = remap[l];
  out.labels = std::move(raw);
  return out;
}

std::vector<BinaryMask> connected_components(const BinaryMask& mask, Connectivity connectivity,
                                             std::size_t min_voxels) {
  const auto cl = label_components(mask, connectivity);
  std::size_t keep = 0;
  while (keep < cl.sizes.size() && cl.sizes[keep] >= min_voxels) ++keep;
  std::vector<BinaryMask> out(keep, BinaryMask(mask.geometry()));
  for (std::size_t v = 0; v < cl.labels.size(); ++v) {
    const auto l = cl.labels[v];
    if (l != 0 && l <= keep) out[l - 1].set(v);
  }
  return out;
}

std::size_t count_components(const BinaryMask& mask, Connectivity connectivity, std::size_t min_voxels) {
  const auto cl = label_components(mask, connectivity);
  return static_cast<std::size_t>(
      std::count_if(cl.sizes.begin(), cl.sizes.end(), [&](std::size_t s) { return s >= min_voxels; }));
}

BinaryMask boundary(const BinaryMask& mask, Connectivity connectivity) {
  const Geometry& g = mask.geometry();
  BinaryMask out(g);
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    if (!mask[v]) continue;
    bool exposed = false;
    const bool inside = for_each_neighbor(g, v, connectivity, [&](std::size_t nb) {
      if (!mask[nb]) exposed = true;
    });
    if (exposed || !inside) out.set(v);
  }
  return out;
}

double surface_area(const BinaryMask& mask) {
  const Geometry& g = mask.geometry();
  const auto [nx, ny, nz] = g.dims;
  std::array<std::size_t, 3> faces{0, 0, 0};
  bool any = false;
  for (std::size_t k = 0; k < nz; ++k) {
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        if (!mask.at(i, j, k)) continue;
        any = true;
        faces[0] += (i == 0 || !mask.at(i - 1, j, k)) + (i + 1 == nx || !mask.at(i + 1, j, k));
        faces[1] += (j == 0 || !mask.at(i, j - 1, k)) + (j + 1 == ny || !mask.at(i, j + 1, k));
        faces[2] += (k == 0 || !mask.at(i, j, k - 1)) + (k + 1 == nz || !mask.at(i, j, k + 1));
      }
    }
  }
  if (!any) throw Error(ErrorCode::EmptyMask, "surface area of an empty mask");
  const auto& s = g.spacing;
  return static_cast<double>(faces[0]) * (s[1] * s[2]) + static_cast<double>(faces[1]) * (s[0] * s[2]) +
         static_cast<double>(faces[2]) * (s[0] * s[1]);
}

double sphericity(const BinaryMask& mask) {
  const double area = surface_area(mask);
  const double volume = static_cast<double>(mask.count()) * mask.geometry().voxel_volume_mm3();
  return std::cbrt(M_PI) * std::pow(6.0 * volume, 2.0 / 3.0) / area;
}

double gradient_magnitude_at(const VoxelGrid& grid, std::size_t i, std::size_t j, std::size_t k) noexcept {
  const Geometry& g = grid.geometry();
  const Index3 c{i, j, k};
  double sum = 0.0;
  for (int a = 0; a < 3; ++a) {
    const std::size_t n = g.dims[a];
    if (n < 2) continue;
    Index3 lo = c, hi = c;
    double span;
    if (c[a] == 0) {
      hi[a] = 1;
      span = 1.0;
    } else if (c[a] + 1 == n) {
      lo[a] = n - 2;
      span = 1.0;
    } else {
      lo[a] = c[a] - 1;
      hi[a] = c[a] + 1;
      span = 2.0;
    }
    const double partial = (grid.at(hi[0], hi[1], hi[2]) - grid.at(lo[0], lo[1], lo[2])) / (span * g.spacing[a]);
    sum += partial * partial;
  }
  return std::sqrt(sum);
}

VoxelGrid gradient_magnitude(const VoxelGrid& grid) {
  const Geometry& g = grid.geometry();
  std::vector<double> out(grid.size());
  std::size_t v = 0;
  for (std::size_t k = 0; k < g.dims[2]; ++k) {
    for (std::size_t j = 0; j < g.dims[1]; ++j) {
      for (std::size_t i = 0; i < g.dims[0]; ++i) out[v++] = gradient_magnitude_at(grid, i, j, k);
    }
  }
  return VoxelGrid(g, std::move(out));
}

BinaryMask reachable_from_border(const BinaryMask& passable) {
  const Geometry& g = passable.geometry();
  const auto [nx, ny, nz] = g.dims;
  BinaryMask seen(g);
  std::vector<std::size_t> stack;
  auto push = [&](std::size_t v) {
    if (passable[v] && !seen[v]) {
      seen.set(v);
      stack.push_back(v);
    }
  };
  for (std::size_t k = 0; k < nz; ++k) {
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        if (i == 0 || j == 0 || k == 0 || i + 1 == nx || j + 1 == ny || k + 1 == nz) push(g.index(i, j, k));
      }
    }
  }
  while (!stack.empty()) {
    const std::size_t cur = stack.back();
    stack.pop_back();
    for_each_neighbor(g, cur, Connectivity::Six, push);
  }
  return seen;
}

}  // namespace cimllm::voxel
