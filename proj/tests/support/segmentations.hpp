#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "cimllm/volume.hpp"

namespace fixture {

using cimllm::SegmentationMap;
using cimllm::Geometry;
using cimllm::Vec3;

inline SegmentationMap swap_net_et(const SegmentationMap& seg) {
  std::vector<std::uint8_t> labels(seg.labels().begin(), seg.labels().end());
  for (auto& l : labels) {
    if (l == 1) {
      l = 4;
    } else if (l == 4) {
      l = 1;
    }
  }
  return SegmentationMap(seg.geometry(), labels);
}

/// Blob or whole-grid speckle of random NET/ET/ED proportions; never empty.
inline SegmentationMap random_segmentation(const Geometry& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> shape(0, 2);
  std::vector<std::uint8_t> labels(g.voxel_count(), 0);
  const double p_net = u(rng) * 0.3, p_et = u(rng) * 0.3, p_ed = u(rng) * 0.3;
  const Vec3 c{u(rng) * static_cast<double>(g.dims[0]), u(rng) * static_cast<double>(g.dims[1]),
               u(rng) * static_cast<double>(g.dims[2])};
  const double r = 2.0 + u(rng) * 6.0;
  const int mode = shape(rng);
  for (std::size_t v = 0; v < labels.size(); ++v) {
    const auto x = g.coords(v);
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) d2 += (static_cast<double>(x[a]) - c[a]) * (static_cast<double>(x[a]) - c[a]);
    const bool in_blob = mode == 0 || d2 <= r * r;
    if (!in_blob) continue;
    const double t = u(rng);
    if (t < p_net) {
      labels[v] = 1;
    } else if (t < p_net + p_et) {
      labels[v] = 4;
    } else if (t < p_net + p_et + p_ed) {
      labels[v] = 2;
    }
  }
  if (std::all_of(labels.begin(), labels.end(), [](auto l) { return l == 0; })) labels[0] = 2;
  return SegmentationMap(g, labels);
}

}  // namespace fixture
